//! Probe MBSFN SINR over a grid of pinned positions (zero shadowing) to find
//! where the deployment rim actually sits relative to the pinned-MCS decode
//! thresholds. Used to design edge-UE scenarios.

use mcast_sim::kernel::RngStream;
use mcast_sim::radio::{Pos, RadioModel};
use mcast_sim::scenario::preset;

fn main() {
    let cfg = preset("ptm-only").unwrap();
    let mut mobility = RngStream::new(1, "mobility");
    let mut channel = RngStream::new(1, "channel");
    let mut radio = RadioModel::new(
        cfg.radio.cell_config(),
        cfg.radio.ue_config(),
        cfg.radio.propagation(),
        cfg.topology.topology(),
        &mut mobility,
        &mut channel,
    );
    for ue in 0..radio.num_ues() {
        radio.set_shadowing(ue, 0.0);
    }
    println!("radius  angle  mbsfn_db");
    for &r in &[0.0, 40.0, 80.0, 120.0, 140.0, 150.0, 154.0] {
        for &a in &[0.0, 15.0, 30.0, 60.0, 90.0] {
            let rad = (a as f64).to_radians();
            radio.place_ue(
                0,
                Pos {
                    x: r * rad.cos(),
                    y: r * rad.sin(),
                },
                0.0,
            );
            let lq = radio.link_quality(0);
            println!("{r:>6.0}  {a:>5.0}  {:>8.2}", lq.sinr_mbsfn_db);
        }
    }
}
