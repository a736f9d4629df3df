//! Mean stable fraction and dyad occupancy of the default robot against a
//! reactive partner, over a range of seeds.
//!
//! `cargo run --release -p sgs-core --example stability_sweep -- [seeds] [duration]`

use sgs_core::simulator::{run_seeds, Scenario};
use sgs_core::trace::compute_metrics;
use sgs_core::{AgentGazeState, PairKey};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let duration: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(60.0);
    let scenario = Scenario::reactive_default(0, duration);
    let seeds: Vec<u64> = (0..n).collect();
    let mut occupancy = [0.0; 25];
    let mut stable = 0.0;
    let mut episodes = 0usize;
    let mut passages = 0usize;
    for out in run_seeds(&scenario, &seeds) {
        let m = compute_metrics(&out.expect("run").trace).expect("metrics");
        stable += m.stable_fraction;
        episodes += m.joint_attention_episodes;
        passages += m.gate_passages;
        for (k, v) in m.occupancy {
            occupancy[k.index()] += v;
        }
    }
    let n = n as f64;
    println!("mean stable_fraction {:.4}", stable / n);
    println!("mean joint_attention_episodes {:.2}", episodes as f64 / n);
    println!("mean gate_passages {:.2}", passages as f64 / n);
    print!("{:>6}", "");
    for o in AgentGazeState::ALL {
        print!("{:>8}", o.as_str());
    }
    println!();
    for s in AgentGazeState::ALL {
        print!("{:>6}", s.as_str());
        for o in AgentGazeState::ALL {
            print!("{:>8.4}", occupancy[PairKey::new(s, o).index()] / n);
        }
        println!();
    }
}
