//! Friction–slip curves of the three preset surfaces.
//!
//! cargo run --example tyre_curves

use abs_lab::tyre::{friction, optimal_slip, Surface};

fn main() {
    print!("{:>7}", "kappa");
    for s in Surface::ALL {
        print!("{:>9}", s.name());
    }
    println!();
    for i in 0..=20 {
        let kappa = -0.05 * i as f64;
        print!("{kappa:>7.2}");
        for s in Surface::ALL {
            print!("{:>9.4}", friction(kappa, &s.params()));
        }
        println!();
    }
    println!();
    for s in Surface::ALL {
        let p = s.params();
        let k = optimal_slip(&p);
        println!("{:<5} peak μ = {:.4} at κ = {k:.5}", s.name(), friction(k, &p));
    }
}
