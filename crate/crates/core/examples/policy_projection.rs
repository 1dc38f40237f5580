//! Drive of the hand-crafted rule and of an untrained network on the
//! stereographic projection of the Bloch sphere, printed as a coarse map.
//!
//! ```sh
//! cargo run --release --example policy_projection
//! ```

use qubit_feedback::cli::{project, random_state_net};
use qubit_feedback::controller::Controller;

fn main() -> qubit_feedback::Result<()> {
    let n_r = 6;
    let n_phi = 12;
    for (name, c) in [
        ("hand-crafted", Controller::Handcrafted { omega_max: 10.0 }),
        ("network", random_state_net(&[4, 32, 16, 1], 10.0, 1)?),
    ] {
        println!("{name}: rows r = 0 (ground) .. 1 (equator), columns phi = 0 .. 2 pi");
        let rows = project(&c, n_r, n_phi)?;
        for line in rows.chunks(n_phi) {
            let cells: Vec<String> = line.iter().map(|x| format!("{:+5.1}", x[2])).collect();
            println!("  r {:.1}: {}", line[0][0], cells.join(" "));
        }
    }
    Ok(())
}
