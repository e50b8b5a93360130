//! All-to-all time and energy models for a few cluster shapes.

use rqcsim::cluster::{model_all2all_time, model_energy, ClusterSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ClusterSpec::default();
    println!("alpha {} W, beta {} W, r {}", spec.alpha, spec.beta, spec.r);
    for n in [2, 4, 8, 16, 32] {
        let inter = model_all2all_time(1e9, spec.inter_bw, n, spec.r)?;
        let intra = model_all2all_time(1e9, spec.intra_bw, n, spec.r)?;
        println!("N = {n:>2}: 1 GB inter {inter:.4e} s, intra {intra:.4e} s");
    }
    let t_calc = 2e15 / spec.compute_rate;
    let t_comm = model_all2all_time(8e9, spec.inter_bw, 8, spec.r)?;
    println!("2 PFLOP step with an 8 GB exchange: {:.3} J", model_energy(t_comm, t_calc, spec.alpha, spec.beta));
    Ok(())
}
