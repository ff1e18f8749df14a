mod common;

use common::*;

#[test]
fn acceptance_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let mut results = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
    ];
    match smoke_run(tmp.path()) {
        Ok((run, took)) => {
            results.push(criterion_8(&run, took));
            results.push(criterion_9(&run));
            results.push(criterion_10());
            results.push(criterion_11(&run));
        }
        Err(e) => {
            let failed = format!("smoke run failed: {e}");
            results.push(Err(failed.clone()));
            results.push(Err(failed.clone()));
            results.push(criterion_10());
            results.push(Err(failed));
        }
    }
    let mut failed = Vec::new();
    for (i, r) in results.iter().enumerate() {
        if !report(i + 1, r) {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
