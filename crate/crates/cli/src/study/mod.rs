//! Blinded pairwise preference study: material layout, sessions, votes.

mod service;
mod session;
mod votes;

pub use service::{router, serve, StudyState};
pub use session::{
    MethodNames, PairAssets, Role, Session, SessionPair, Side, StudyPool, METHODS_FILE, METHOD_A_FILE, METHOD_B_FILE,
    ORIGINAL_FILE, SESSION_PAIRS,
};
pub use votes::{latest_votes, read_votes, FactorTable, StudyReport, VoteLog, VoteRecord};
