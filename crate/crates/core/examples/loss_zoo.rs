//! Tabulate ρ, ψ and ψ' for each loss. All share ρ(u) = u²/2 near zero and
//! differ in how they bend towards linear growth.
//!
//!     cargo run --release --example loss_zoo

use hdrisk::losses::LossSpec;

fn main() {
    let losses = [
        LossSpec::Square,
        LossSpec::Huber { scale: 1.0 },
        LossSpec::SmoothHuber0 { scale: 1.0 },
        LossSpec::SmoothHuber1 { scale: 1.0 },
    ];
    for loss in losses {
        println!("{}", loss.name());
        println!("  {:>6} {:>10} {:>10} {:>10}", "u", "rho", "psi", "psi'");
        for u in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0] {
            let v = loss.eval(u);
            println!("  {u:>6.2} {:>10.5} {:>10.5} {:>10.5}", v.rho, v.psi, v.psi_prime);
        }
    }
}
