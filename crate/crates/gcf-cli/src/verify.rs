use anyhow::Result;
use gcf_core::suite::{run_suite, SuiteName};

/// Run a verification suite and print one line per check. Returns 0 when
/// everything passed, 1 otherwise.
pub fn cmd_verify(suite: SuiteName, dim: usize, resolution: &[usize]) -> Result<i32> {
    let outcomes = run_suite(suite, dim, resolution);
    let mut failed = 0;
    println!(
        "verify: {} checks on dimension {dim}, resolution {resolution:?}",
        outcomes.len()
    );
    for o in &outcomes {
        println!("{}", o.describe());
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} of {} checks failed", outcomes.len());
        Ok(1)
    } else {
        println!("all {} checks passed", outcomes.len());
        Ok(0)
    }
}
