//! Radio model: urban-macro pathloss with frozen lognormal shadowing, a
//! parabolic antenna pattern, per-UE unicast and MBSFN SINR, an MCS ladder
//! for link adaptation, and random-direction mobility with a reflective
//! deployment boundary.
//!
//! Three simulated cells form one MBSFN area; a wraparound ring of cells
//! contributes inter-cell interference only. For MBSFN reception the in-area
//! cells' signals combine as useful power, which is what gives multicast its
//! coverage advantage between sites and its cliff at the deployment rim.

use crate::error::SimError;
use crate::kernel::{RngStream, SimTime};

/// Planar position in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pos {
    pub x: f64,
    pub y: f64,
}

impl Pos {
    pub fn dist(self, other: Pos) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Static per-cell parameters (Table-1 network block plus siting decisions).
#[derive(Debug, Clone)]
pub struct CellConfig {
    pub carrier_freq_ghz: f64,
    pub tx_power_dbm: f64,
    pub bandwidth_mhz: f64,
    pub element_gain_dbi: f64,
    pub beamwidth_azimuth_deg: f64,
    pub beamwidth_elevation_deg: f64,
    pub electrical_downtilt_deg: f64,
    pub noise_figure_db: f64,
    pub site_height_m: f64,
    /// Extra gain on the serving link for dedicated (beamformed) unicast
    /// transmissions. Broadcast uses the wide sector beam and gets none.
    pub unicast_bf_gain_db: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            carrier_freq_ghz: 3.5,
            tx_power_dbm: 51.0,
            bandwidth_mhz: 100.0,
            element_gain_dbi: 5.0,
            beamwidth_azimuth_deg: 65.0,
            beamwidth_elevation_deg: 65.0,
            electrical_downtilt_deg: 20.0,
            noise_figure_db: 5.0,
            site_height_m: 25.0,
            unicast_bf_gain_db: 18.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UeRadioConfig {
    pub noise_figure_db: f64,
    pub speed_kmph: f64,
    pub height_m: f64,
}

impl Default for UeRadioConfig {
    fn default() -> Self {
        UeRadioConfig {
            noise_figure_db: 9.0,
            speed_kmph: 3.0,
            height_m: 1.5,
        }
    }
}

/// Propagation constants. Log-distance urban-macro form
/// `PL = intercept + 10 * exponent * log10(d / 100 m)` with the intercept
/// calibrated to free space at 100 m and 3.5 GHz, plus frozen lognormal
/// shadowing per (UE, cell).
#[derive(Debug, Clone)]
pub struct PropagationParams {
    pub exponent: f64,
    pub intercept_db: f64,
    pub reference_distance_m: f64,
    pub shadowing_sigma_db: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            exponent: 3.76,
            intercept_db: 83.3,
            reference_distance_m: 100.0,
            shadowing_sigma_db: 8.0,
        }
    }
}

/// Deployment geometry: 3 simulated macro cells on a 200 m inter-site
/// distance triangle plus a wraparound interference ring, UEs uniform in a
/// disc around the centroid.
#[derive(Debug, Clone)]
pub struct TopologyConfig {
    pub inter_site_distance_m: f64,
    pub ues_per_cell: usize,
    pub num_ring_cells: usize,
    pub ring_radius_m: f64,
    /// Extra transmit power applied to ring cells, in dB (negative =
    /// attenuated). Shapes how sharp the SINR cliff at the deployment rim
    /// is. The default models a partially loaded, partially MBSFN-muted
    /// outer tier rather than six fully lit co-channel interferers.
    pub ring_power_offset_db: f64,
    pub deployment_radius_m: f64,
    /// Whether the wraparound ring transmits (as interference) during MBSFN
    /// subframes. Default true.
    pub ring_interferes_mbsfn: bool,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            inter_site_distance_m: 200.0,
            ues_per_cell: 10,
            num_ring_cells: 6,
            ring_radius_m: 290.0,
            ring_power_offset_db: -15.0,
            deployment_radius_m: 155.0,
            ring_interferes_mbsfn: true,
        }
    }
}

pub const NUM_SIMULATED_CELLS: usize = 3;

/// One MCS ladder rung.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub index: usize,
    pub spectral_eff_bits_per_sym: f64,
    pub min_sinr_db: f64,
}

/// Monotone MCS ladder. Unicast picks the highest rung whose threshold the
/// SINR meets; multicast pins one rung and loses transport blocks below its
/// threshold (step BLER).
#[derive(Debug, Clone)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

/// Data resource elements per PRB per TTI used to convert spectral
/// efficiency to bits. Fixed artifact constant (12 subcarriers x 14 symbols
/// minus overhead).
pub const RES_PER_PRB_PER_TTI: f64 = 160.0;

/// PRBs per TTI for the 100 MHz carrier.
pub const PRBS_PER_TTI: u32 = 273;

impl McsTable {
    /// Parse the plain-text tabular format: `index eff min_sinr` per line,
    /// `#` comments allowed.
    pub fn parse(text: &str) -> Result<McsTable, SimError> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64, SimError> {
                tok.ok_or_else(|| SimError::McsTable(format!("line {}: too few fields", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| SimError::McsTable(format!("line {}: {e}", lineno + 1)))
            };
            let index = parse(it.next())? as usize;
            let eff = parse(it.next())?;
            let min_sinr = parse(it.next())?;
            entries.push(McsEntry {
                index,
                spectral_eff_bits_per_sym: eff,
                min_sinr_db: min_sinr,
            });
        }
        let table = McsTable { entries };
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &std::path::Path) -> Result<McsTable, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::McsTable(format!("{}: {e}", path.display())))?;
        McsTable::parse(&text)
    }

    /// The ladder shipped with the simulator.
    pub fn builtin() -> McsTable {
        McsTable::parse(include_str!("../data/mcs_table.txt")).expect("builtin MCS table is valid")
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.entries.is_empty() {
            return Err(SimError::McsTable("empty table".into()));
        }
        for (i, w) in self.entries.windows(2).enumerate() {
            if w[1].index != w[0].index + 1 {
                return Err(SimError::McsTable(format!("index gap after entry {i}")));
            }
            if w[1].spectral_eff_bits_per_sym <= w[0].spectral_eff_bits_per_sym {
                return Err(SimError::McsTable(format!(
                    "spectral efficiency not strictly increasing at index {}",
                    w[1].index
                )));
            }
            if w[1].min_sinr_db <= w[0].min_sinr_db {
                return Err(SimError::McsTable(format!(
                    "min SINR not strictly increasing at index {}",
                    w[1].index
                )));
            }
        }
        Ok(())
    }

    pub fn entry(&self, index: usize) -> Option<&McsEntry> {
        self.entries.get(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Highest entry with `min_sinr <= sinr` (closed lower bound), or `None`
    /// if the SINR is below the whole ladder (UE unservable this TTI).
    pub fn select(&self, sinr_db: f64) -> Option<&McsEntry> {
        self.entries
            .iter()
            .rev()
            .find(|e| sinr_db >= e.min_sinr_db)
    }

    /// Bits deliverable per PRB per TTI.
    ///
    /// Unicast (no pinned MCS): link adaptation picks the rung, 0.0 when
    /// unservable. Multicast (pinned MCS): the rate is fixed by that entry
    /// regardless of the receiver's SINR; reception is decided separately.
    pub fn rate_bits_per_prb(&self, sinr_db: f64, pinned: Option<usize>) -> f64 {
        match pinned {
            Some(idx) => {
                let e = self.entry(idx).expect("pinned MCS index in table");
                e.spectral_eff_bits_per_sym * RES_PER_PRB_PER_TTI
            }
            None => self
                .select(sinr_db)
                .map(|e| e.spectral_eff_bits_per_sym * RES_PER_PRB_PER_TTI)
                .unwrap_or(0.0),
        }
    }
}

/// Per-UE link state, recomputed on every mobility step.
#[derive(Debug, Clone, Copy)]
pub struct LinkQuality {
    pub serving_cell: usize,
    pub sinr_unicast_db: f64,
    pub sinr_mbsfn_db: f64,
}

struct CellSite {
    pos: Pos,
    boresight_deg: f64,
    power_offset_db: f64,
    in_mbsfn_area: bool,
}

struct UeMobility {
    pos: Pos,
    heading_rad: f64,
}

/// The full radio world: cell sites, UE positions and frozen shadowing.
pub struct RadioModel {
    cell_cfg: CellConfig,
    ue_cfg: UeRadioConfig,
    prop: PropagationParams,
    topo: TopologyConfig,
    cells: Vec<CellSite>,
    ues: Vec<UeMobility>,
    /// shadowing[ue][cell], dB; drawn once per run.
    shadowing: Vec<Vec<f64>>,
    link_quality: Vec<LinkQuality>,
}

/// Free-space-like pathloss in dB for the documented log-distance form,
/// without shadowing. Distances below 1 m are clamped.
pub fn pathloss_db(prop: &PropagationParams, dist_3d_m: f64) -> f64 {
    let d = dist_3d_m.max(1.0);
    prop.intercept_db + 10.0 * prop.exponent * (d / prop.reference_distance_m).log10()
}

fn antenna_gain_db(cfg: &CellConfig, boresight_deg: f64, site: Pos, site_h: f64, ue: Pos, ue_h: f64) -> f64 {
    const ATTENUATION_FLOOR_DB: f64 = 30.0;
    // Effective boresight gain: element gain plus the hard-wired vertical
    // array gain, ~14 dBi.
    let g_max = cfg.element_gain_dbi + 9.0;
    let az_to_ue = (ue.y - site.y).atan2(ue.x - site.x).to_degrees();
    let mut d_az = (az_to_ue - boresight_deg) % 360.0;
    if d_az > 180.0 {
        d_az -= 360.0;
    } else if d_az < -180.0 {
        d_az += 360.0;
    }
    let az_att = (12.0 * (d_az / cfg.beamwidth_azimuth_deg).powi(2)).min(ATTENUATION_FLOOR_DB);
    let d2d = site.dist(ue).max(1.0);
    let el_to_ue = ((site_h - ue_h) / d2d).atan().to_degrees();
    let el_att = (12.0 * ((el_to_ue - cfg.electrical_downtilt_deg) / cfg.beamwidth_elevation_deg).powi(2))
        .min(ATTENUATION_FLOOR_DB);
    g_max - az_att - el_att
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

impl RadioModel {
    /// Build the world: place cells, draw UE positions/headings from the
    /// mobility stream and shadowing from the channel stream. Draw order is
    /// fixed, so adding consumers elsewhere never shifts these values.
    pub fn new(
        cell_cfg: CellConfig,
        ue_cfg: UeRadioConfig,
        prop: PropagationParams,
        topo: TopologyConfig,
        mobility_rng: &mut RngStream,
        channel_rng: &mut RngStream,
    ) -> RadioModel {
        let mut cells = Vec::new();
        let site_radius = topo.inter_site_distance_m / 3f64.sqrt();
        for i in 0..NUM_SIMULATED_CELLS {
            let ang = (90.0 + 120.0 * i as f64).to_radians();
            let pos = Pos {
                x: site_radius * ang.cos(),
                y: site_radius * ang.sin(),
            };
            cells.push(CellSite {
                pos,
                // Boresight towards the centroid: the three beams jointly
                // cover the deployment disc.
                boresight_deg: (ang.to_degrees() + 180.0) % 360.0,
                power_offset_db: 0.0,
                in_mbsfn_area: true,
            });
        }
        for i in 0..topo.num_ring_cells {
            let ang = (30.0 + 360.0 * i as f64 / topo.num_ring_cells as f64).to_radians();
            let pos = Pos {
                x: topo.ring_radius_m * ang.cos(),
                y: topo.ring_radius_m * ang.sin(),
            };
            cells.push(CellSite {
                pos,
                boresight_deg: (ang.to_degrees() + 180.0) % 360.0,
                power_offset_db: topo.ring_power_offset_db,
                in_mbsfn_area: false,
            });
        }

        let num_ues = topo.ues_per_cell * NUM_SIMULATED_CELLS;
        let mut ues = Vec::with_capacity(num_ues);
        for _ in 0..num_ues {
            // Uniform over the deployment disc.
            let r = topo.deployment_radius_m * mobility_rng.next_f64().sqrt();
            let theta = mobility_rng.uniform(0.0, std::f64::consts::TAU);
            let heading = mobility_rng.uniform(0.0, std::f64::consts::TAU);
            ues.push(UeMobility {
                pos: Pos {
                    x: r * theta.cos(),
                    y: r * theta.sin(),
                },
                heading_rad: heading,
            });
        }

        let shadowing = (0..num_ues)
            .map(|_| {
                (0..cells.len())
                    .map(|_| channel_rng.std_normal() * prop.shadowing_sigma_db)
                    .collect()
            })
            .collect();

        let mut model = RadioModel {
            cell_cfg,
            ue_cfg,
            prop,
            topo,
            cells,
            ues,
            shadowing,
            link_quality: Vec::new(),
        };
        model.recompute_link_quality();
        model
    }

    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn ue_pos(&self, ue: usize) -> Pos {
        self.ues[ue].pos
    }

    /// Test/scenario hook: pin a UE's position and heading before the run.
    pub fn place_ue(&mut self, ue: usize, pos: Pos, heading_deg: f64) {
        self.ues[ue].pos = pos;
        self.ues[ue].heading_rad = heading_deg.to_radians();
        self.recompute_link_quality();
    }

    /// Test hook: override a UE's shadowing terms.
    pub fn set_shadowing(&mut self, ue: usize, value_db: f64) {
        for s in &mut self.shadowing[ue] {
            *s = value_db;
        }
        self.recompute_link_quality();
    }

    pub fn link_quality(&self, ue: usize) -> LinkQuality {
        self.link_quality[ue]
    }

    /// SINR the unicast link adaptation sees. Dedicated (beamformed) unicast
    /// transmissions are spatially separated and coordinated between the
    /// in-area cells, so the dedicated link is noise-limited: serving-cell
    /// SNR plus the dedicated-beam gain. The common sector-beam observable
    /// ([`LinkQuality::sinr_unicast_db`]) keeps the full inter-cell
    /// interference and is what radio-level comparisons (and the
    /// multicast-vs-unicast coverage argument) are made on.
    pub fn unicast_link_sinr_db(&self, ue: usize) -> f64 {
        let serving = self.link_quality[ue].serving_cell;
        self.unicast_link_sinr_to_cell_db(ue, serving)
    }

    /// Dedicated-link SINR toward one specific cell (see
    /// [`Self::unicast_link_sinr_db`]).
    pub fn unicast_link_sinr_to_cell_db(&self, ue: usize, cell: usize) -> f64 {
        self.rx_power_dbm(ue, cell) - self.noise_dbm() + self.cell_cfg.unicast_bf_gain_db
    }

    /// Load-balanced attachment across the simulated cells: every UE prefers
    /// its strongest cell, but each cell's share is capped at an equal split,
    /// modeling mobility load balancing. UEs with the largest power margin
    /// between their first and second choice keep their first choice;
    /// assignment is deterministic (ties broken by UE index).
    pub fn balanced_serving(&self) -> Vec<usize> {
        let n = self.ues.len();
        let cap = n.div_ceil(NUM_SIMULATED_CELLS);
        let powers: Vec<Vec<f64>> = (0..n)
            .map(|ue| {
                (0..NUM_SIMULATED_CELLS)
                    .map(|c| self.rx_power_dbm(ue, c))
                    .collect()
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        let margin = |ue: usize| -> f64 {
            let mut p = powers[ue].clone();
            p.sort_by(|a, b| b.partial_cmp(a).unwrap());
            p[0] - p[1]
        };
        order.sort_by(|&a, &b| {
            margin(b)
                .partial_cmp(&margin(a))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut load = [0usize; NUM_SIMULATED_CELLS];
        let mut serving = vec![0usize; n];
        for &ue in &order {
            let mut prefs: Vec<usize> = (0..NUM_SIMULATED_CELLS).collect();
            prefs.sort_by(|&a, &b| powers[ue][b].partial_cmp(&powers[ue][a]).unwrap().then(a.cmp(&b)));
            let cell = prefs
                .iter()
                .copied()
                .find(|&c| load[c] < cap)
                .unwrap_or(prefs[0]);
            load[cell] += 1;
            serving[ue] = cell;
        }
        serving
    }

    /// Received power from `cell` at the UE's position, dBm.
    fn rx_power_dbm(&self, ue: usize, cell: usize) -> f64 {
        let site = &self.cells[cell];
        let d2d = site.pos.dist(self.ues[ue].pos);
        let dh = self.cell_cfg.site_height_m - self.ue_cfg.height_m;
        let d3d = (d2d * d2d + dh * dh).sqrt();
        let gain = antenna_gain_db(
            &self.cell_cfg,
            site.boresight_deg,
            site.pos,
            self.cell_cfg.site_height_m,
            self.ues[ue].pos,
            self.ue_cfg.height_m,
        );
        self.cell_cfg.tx_power_dbm + site.power_offset_db + gain
            - pathloss_db(&self.prop, d3d)
            - self.shadowing[ue][cell]
    }

    fn noise_dbm(&self) -> f64 {
        -174.0 + 10.0 * (self.cell_cfg.bandwidth_mhz * 1e6).log10() + self.ue_cfg.noise_figure_db
    }

    /// Serving-cell SINR: strongest simulated cell over everything else plus
    /// thermal noise.
    pub fn unicast_sinr_db(&self, ue: usize) -> (usize, f64) {
        let powers: Vec<f64> = (0..self.cells.len())
            .map(|c| db_to_linear(self.rx_power_dbm(ue, c)))
            .collect();
        let serving = (0..NUM_SIMULATED_CELLS)
            .max_by(|&a, &b| powers[a].partial_cmp(&powers[b]).unwrap())
            .unwrap();
        let signal = powers[serving];
        let interference: f64 = powers
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != serving)
            .map(|(_, p)| p)
            .sum();
        let noise = db_to_linear(self.noise_dbm());
        (serving, linear_to_db(signal / (interference + noise)))
    }

    /// MBSFN SINR: all in-area cells combine as useful power; the ring
    /// counts as interference when configured to transmit during MBSFN
    /// subframes.
    pub fn mbsfn_sinr_db(&self, ue: usize) -> f64 {
        let mut signal = 0.0;
        let mut interference = 0.0;
        for c in 0..self.cells.len() {
            let p = db_to_linear(self.rx_power_dbm(ue, c));
            if self.cells[c].in_mbsfn_area {
                signal += p;
            } else if self.topo.ring_interferes_mbsfn {
                interference += p;
            }
        }
        let noise = db_to_linear(self.noise_dbm());
        linear_to_db(signal / (interference + noise))
    }

    fn recompute_link_quality(&mut self) {
        self.link_quality = (0..self.ues.len())
            .map(|ue| {
                let (serving, uni) = self.unicast_sinr_db(ue);
                LinkQuality {
                    serving_cell: serving,
                    sinr_unicast_db: uni,
                    sinr_mbsfn_db: self.mbsfn_sinr_db(ue),
                }
            })
            .collect();
    }

    /// Advance every UE by `dt` along its heading; reflect at the deployment
    /// disc boundary; recompute all SINRs. Headings only change on
    /// reflection, so trajectories are a pure function of the initial draws.
    pub fn mobility_step(&mut self, dt: SimTime) {
        assert!(dt.ticks() > 0, "mobility_step with dt = 0");
        let speed_mps = self.ue_cfg.speed_kmph / 3.6;
        let step = speed_mps * dt.as_secs_f64();
        let r_max = self.topo.deployment_radius_m;
        for ue in &mut self.ues {
            let mut x = ue.pos.x + step * ue.heading_rad.cos();
            let mut y = ue.pos.y + step * ue.heading_rad.sin();
            let r = (x * x + y * y).sqrt();
            if r > r_max {
                // Reflect the heading about the boundary tangent and mirror
                // the overshoot back inside.
                let n = (y.atan2(x)).to_degrees().to_radians(); // radial direction
                let v = ue.heading_rad;
                ue.heading_rad = std::f64::consts::PI + 2.0 * n - v;
                let overshoot = r - r_max;
                let scale = (r_max - overshoot).max(0.0) / r;
                x *= scale;
                y *= scale;
            }
            ue.pos = Pos { x, y };
        }
        self.recompute_link_quality();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_world(topo: TopologyConfig) -> RadioModel {
        let mut mob = RngStream::new(1, "mobility");
        let mut chan = RngStream::new(1, "channel");
        RadioModel::new(
            CellConfig::default(),
            UeRadioConfig::default(),
            PropagationParams::default(),
            topo,
            &mut mob,
            &mut chan,
        )
    }

    #[test]
    fn pathloss_doubles_by_exponent_law() {
        let prop = PropagationParams::default();
        let d = 150.0;
        let delta = pathloss_db(&prop, 2.0 * d) - pathloss_db(&prop, d);
        let expected = 10.0 * prop.exponent * 2f64.log10();
        assert!((delta - expected).abs() < 1e-9);
    }

    #[test]
    fn pathloss_at_reference_distance_is_intercept() {
        let prop = PropagationParams::default();
        assert!((pathloss_db(&prop, 100.0) - 83.3).abs() < 1e-9);
    }

    #[test]
    fn pathloss_clamps_below_one_metre() {
        let prop = PropagationParams::default();
        assert_eq!(pathloss_db(&prop, 0.05), pathloss_db(&prop, 1.0));
    }

    #[test]
    fn shadowing_is_frozen_per_pair() {
        let model = small_world(TopologyConfig::default());
        let a = model.rx_power_dbm(0, 1);
        let b = model.rx_power_dbm(0, 1);
        assert_eq!(a, b);
    }

    #[test]
    fn noise_only_sinr_equals_snr() {
        // Single simulated cell, no ring: SINR == SNR.
        let mut topo = TopologyConfig {
            num_ring_cells: 0,
            ..TopologyConfig::default()
        };
        topo.ues_per_cell = 1;
        let mut mob = RngStream::new(1, "mobility");
        let mut chan = RngStream::new(1, "channel");
        let mut model = RadioModel::new(
            CellConfig::default(),
            UeRadioConfig::default(),
            PropagationParams::default(),
            topo,
            &mut mob,
            &mut chan,
        );
        // Keep only the first cell as "simulated" interference source; with 3
        // in-area cells the serving SNR check needs isolation, so compare
        // against a hand link budget for the serving cell instead.
        model.set_shadowing(0, 0.0);
        model.place_ue(0, Pos { x: 0.0, y: 0.0 }, 0.0);
        let (serving, sinr) = model.unicast_sinr_db(0);
        let sig = model.rx_power_dbm(0, serving);
        let other: f64 = (0..NUM_SIMULATED_CELLS)
            .filter(|&c| c != serving)
            .map(|c| db_to_linear(model.rx_power_dbm(0, c)))
            .sum();
        let noise = db_to_linear(model.noise_dbm());
        let expected = sig - linear_to_db(other + noise);
        assert!((sinr - expected).abs() < 1e-9);
    }

    #[test]
    fn equidistant_equal_cells_give_zero_db() {
        // Symmetric two-cell geometry via the triangle: a UE on the midpoint
        // between cells 0 and 1 with no shadowing and the third cell plus
        // ring removed from the balance must see SINR driven by the symmetric
        // pair. We check the pairwise powers match instead of full SINR.
        let mut model = small_world(TopologyConfig {
            num_ring_cells: 0,
            ..TopologyConfig::default()
        });
        model.set_shadowing(0, 0.0);
        let mid = Pos {
            x: (model.cells[0].pos.x + model.cells[1].pos.x) / 2.0,
            y: (model.cells[0].pos.y + model.cells[1].pos.y) / 2.0,
        };
        model.place_ue(0, mid, 0.0);
        let p0 = model.rx_power_dbm(0, 0);
        let p1 = model.rx_power_dbm(0, 1);
        assert!((p0 - p1).abs() < 1e-6, "p0={p0} p1={p1}");
    }

    #[test]
    fn center_ue_sinr_in_sanity_band() {
        let mut model = small_world(TopologyConfig::default());
        model.set_shadowing(0, 0.0);
        model.place_ue(0, Pos { x: 0.0, y: 0.0 }, 0.0);
        let (_, sinr) = model.unicast_sinr_db(0);
        assert!((-10.0..=40.0).contains(&sinr), "sinr={sinr}");
    }

    #[test]
    fn mbsfn_dominates_unicast() {
        // In-area neighbours move from interference to signal, so MBSFN SINR
        // is never below unicast SINR, for every UE.
        let model = small_world(TopologyConfig::default());
        for ue in 0..model.num_ues() {
            let lq = model.link_quality(ue);
            assert!(
                lq.sinr_mbsfn_db >= lq.sinr_unicast_db - 1e-9,
                "ue {ue}: mbsfn {} < unicast {}",
                lq.sinr_mbsfn_db,
                lq.sinr_unicast_db
            );
        }
    }

    #[test]
    fn mbsfn_between_two_cells_beats_single_cell() {
        let mut model = small_world(TopologyConfig::default());
        model.set_shadowing(0, 0.0);
        let mid = Pos {
            x: (model.cells[0].pos.x + model.cells[1].pos.x) / 2.0,
            y: (model.cells[0].pos.y + model.cells[1].pos.y) / 2.0,
        };
        model.place_ue(0, mid, 0.0);
        let lq = model.link_quality(0);
        assert!(lq.sinr_mbsfn_db > lq.sinr_unicast_db + 1.0);
    }

    #[test]
    fn mcs_boundary_is_closed_lower_bound() {
        let t = McsTable::builtin();
        let e = t.entry(5).unwrap();
        assert_eq!(t.select(e.min_sinr_db).unwrap().index, 5);
        assert_eq!(t.select(e.min_sinr_db - 1e-9).unwrap().index, 4);
    }

    #[test]
    fn pinned_mcs_rate_ignores_sinr() {
        let t = McsTable::builtin();
        assert_eq!(t.rate_bits_per_prb(50.0, Some(2)), t.rate_bits_per_prb(3.0, Some(2)));
    }

    #[test]
    fn below_lowest_mcs_rate_is_zero() {
        let t = McsTable::builtin();
        assert_eq!(t.rate_bits_per_prb(0.5, None), 0.0);
    }

    #[test]
    fn unicast_rate_is_nondecreasing_step_function() {
        let t = McsTable::builtin();
        let mut prev = -1.0;
        let mut sinr = -5.0;
        while sinr <= 35.0 {
            let r = t.rate_bits_per_prb(sinr, None);
            assert!(r >= prev, "rate decreased at sinr {sinr}");
            prev = r;
            sinr += 0.1;
        }
    }

    #[test]
    fn mcs_table_rejects_nonmonotone() {
        assert!(McsTable::parse("0 1.0 5.0\n1 0.9 6.0").is_err());
        assert!(McsTable::parse("0 1.0 5.0\n1 1.1 5.0").is_err());
        assert!(McsTable::parse("").is_err());
    }

    #[test]
    fn mobility_displacement_matches_speed() {
        let mut model = small_world(TopologyConfig::default());
        model.place_ue(0, Pos { x: 0.0, y: 0.0 }, 0.0);
        let before = model.ue_pos(0);
        model.mobility_step(SimTime::from_secs(1));
        let after = model.ue_pos(0);
        let expected = 3.0 / 3.6; // 3 km/h over 1 s
        assert!((before.dist(after) - expected).abs() < 1e-9);
    }

    #[test]
    fn mobility_is_deterministic_per_seed() {
        let run = || {
            let mut model = small_world(TopologyConfig::default());
            for _ in 0..500 {
                model.mobility_step(SimTime::from_ms(100));
            }
            (0..model.num_ues()).map(|u| model.ue_pos(u)).collect::<Vec<_>>()
        };
        let a = run();
        let b = run();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa, pb);
        }
    }

    #[test]
    fn long_run_positions_stay_in_bounds_and_spread() {
        let mut model = small_world(TopologyConfig::default());
        let r_max = 155.0;
        let mut inner = 0usize;
        let mut total = 0usize;
        for _ in 0..5_000 {
            model.mobility_step(SimTime::from_ms(1000));
            for ue in 0..model.num_ues() {
                let p = model.ue_pos(ue);
                let r = (p.x * p.x + p.y * p.y).sqrt();
                assert!(r <= r_max + 1e-6, "ue {ue} escaped: r={r}");
                // Inner half-radius disc holds a quarter of the area.
                if r < r_max / 2.0 {
                    inner += 1;
                }
                total += 1;
            }
        }
        let frac = inner as f64 / total as f64;
        assert!((0.1..0.45).contains(&frac), "inner-disc fraction {frac}");
    }
}
