//! One module per subcommand.

pub mod data;
pub mod evaluate;
pub mod infer;
pub mod study;
pub mod train;

use anyhow::Result;

use crate::cli::Command;

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Phantom(a) => data::phantom(a),
        Command::Prepare(a) => data::prepare(a),
        Command::Train(a) => train::train(a),
        Command::Infer(a) => infer::infer(a),
        Command::Evaluate(a) => evaluate::evaluate(a),
        Command::StudyPrepare(a) => study::study_prepare(a),
        Command::StudyServe(a) => study::study_serve(a),
        Command::StudyReport(a) => study::study_report(a),
    }
}
