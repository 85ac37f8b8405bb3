//! Runs every acceptance check at its stated tolerance, one line per check.

use ensemble_qc_cli::claims::run_all;
use ensemble_qc_cli::config::DEFAULT_CLAIMS_SEED;

fn main() {
    let claims = run_all(DEFAULT_CLAIMS_SEED);
    for c in &claims {
        println!("{}", c.line());
    }
    let failed = claims.iter().filter(|c| !c.passed).count();
    println!("\n{} passed, {failed} failed", claims.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
