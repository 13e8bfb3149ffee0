//! Runs all eleven acceptance criteria and prints one PASS/FAIL line per
//! criterion. Unlike `dnls validate`, it does not stop at the first failure.

use std::process::ExitCode;

use dnls_cli::validate::Validator;

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temporary directory");
    let seed = std::env::var("DNLS_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let only: Option<Vec<u8>> =
        std::env::var("DNLS_CRITERIA").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let v = Validator::new(seed, work.path());
    let mut failed = 0;
    let mut ran = 0;
    for (id, _) in Validator::ids() {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let r = v.run(id);
        println!("{}", r.line());
        ran += 1;
        failed += usize::from(!r.passed);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
