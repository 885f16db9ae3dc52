use pvb_core::validation::{run_suite, ValidationOptions};

#[test]
fn suite_passes_and_zero_tolerance_fails() {
    let start = std::time::Instant::now();
    let out = run_suite(&ValidationOptions::default(), |o| {
        println!("{:<14} {:<62} {:>10.3e} <= {:>8.1e} {}", o.module, o.name, o.value, o.tolerance, if o.passed { "ok" } else { "FAIL" });
    });
    println!("suite took {:?}", start.elapsed());
    let failed: Vec<_> = out.iter().filter(|o| !o.passed).collect();
    assert!(failed.is_empty(), "{failed:#?}");

    let strict = ValidationOptions { tolerance_scale: 0.0, ..Default::default() };
    let out = run_suite(&strict, |_| {});
    assert!(out.iter().any(|o| !o.passed));
}
