//! Determinism gate for the binary: every stochastic subcommand must
//! produce byte-identical stdout across repeated runs and across thread
//! counts.

use std::process::Command;

fn capture(args: &[&str], threads: &str) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_arbcost"))
        .args(args)
        .args(["--threads", threads])
        .env_remove("ARBCOST_THREADS")
        .output()
        .expect("spawn arbcost");
    assert!(
        out.status.success(),
        "args {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {id:02} {name}: {verdict} ({detail})");
    assert!(ok, "acceptance criterion {id} failed: {detail}");
}

#[test]
fn acceptance_11_determinism() {
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("mc-price", vec![
            "mc-price", "--lambda", "0.05", "--rho", "0.2", "--spot", "100", "--strike", "100",
            "--maturity", "1", "--paths", "20000", "--steps", "25", "--seed", "42",
        ]),
        ("arb-demo", vec![
            "arb-demo", "--mu1", "0.03", "--mu2", "0.07", "--sigma", "0.2",
            "--steps", "500", "--paths", "200", "--seed", "42",
        ]),
        ("hedge-demo", vec![
            "hedge-demo", "--mu1", "0.04", "--mu2", "0.09", "--sigma", "0.2", "--spot", "100",
            "--strike", "100", "--maturity", "1", "--steps", "200", "--paths", "100",
            "--seed", "42",
        ]),
        ("xcheck", vec![
            "xcheck", "--spot", "100", "--strike", "100", "--maturity", "1", "--rate", "0.05",
            "--vol", "0.2", "--paths", "20000", "--steps", "25", "--seed", "42",
            "--nt", "200", "--ns", "200",
        ]),
    ];

    let mut detail = String::new();
    let mut all_ok = true;
    for (name, args) in &cases {
        let first = capture(args, "1");
        let repeat = capture(args, "1");
        let parallel = capture(args, "4");
        let ok = first == repeat && first == parallel;
        all_ok &= ok;
        if !detail.is_empty() {
            detail.push_str(", ");
        }
        let verdict = if ok { "stable" } else { "DIVERGED" };
        detail.push_str(&format!("{name} {verdict}"));
    }
    report(
        11,
        "cli-determinism",
        all_ok,
        &format!("byte-identical stdout across reruns and 1 vs 4 threads: {detail}"),
    );
}
