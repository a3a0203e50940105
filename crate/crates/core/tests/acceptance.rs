//! Acceptance suite: every criterion at its default tolerance, one
//! PASS/FAIL line each. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use resonance::config::RunConfig;
use resonance::degeneracy::EpReport;
use resonance::verify::{run_all, VerifyInputs};

fn main() -> ExitCode {
    let start = Instant::now();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let cfg = RunConfig::load(&dir.join("ep_config.json")).expect("EP config loads");
    let fixture: EpReport =
        serde_json::from_str(&std::fs::read_to_string(cfg.fixture().unwrap()).expect("fixture exists")).expect("fixture parses");
    let mut inputs = VerifyInputs::new(cfg.potential_spec().expect("family parses"), fixture).expect("fixture schema");
    inputs.seed = cfg.seed();
    let report = run_all(&inputs);
    for c in &report.criteria {
        println!("{}", c.line());
    }
    let failed = report.criteria.iter().filter(|c| !c.passed).count();
    println!("{} of {} criteria passed in {:.1} s", report.criteria.len() - failed, report.criteria.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
