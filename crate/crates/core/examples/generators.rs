//! Built-in generators and sampled structural checks.
//!
//! cargo run --example generators

use ppde::generators::builtin::*;
use ppde::generators::validate_assumptions;

fn main() {
    let list = [
        heat(1, 1.0),
        bsb(&[0.1, 0.2]),
        controlled_drift(&[-1.0, 1.0], 0.5),
        semilinear(SemilinearParams::default()),
        linear_path(LinearPathParams::default()),
    ];
    for f in &list {
        let r = validate_assumptions(f, 200, 1);
        let checks: Vec<String> = r
            .checks
            .iter()
            .map(|c| format!("{}={}", c.name, if c.passed() { "ok" } else { "FAIL" }))
            .collect();
        println!("{:<17} {}", f.name, checks.join(" "));
    }
}
