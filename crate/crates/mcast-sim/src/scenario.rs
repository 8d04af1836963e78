//! Scenario configuration: a flat "overrides the defaults" TOML layout with
//! built-in presets. Every effective parameter has a concrete default, so a
//! serialized resolved config is complete and re-running it reproduces the
//! run byte for byte. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::client::{MediaObject, Popularity};
use crate::delivery::{default_ladder, Rung};
use crate::error::SimError;
use crate::kernel::SimTime;
use crate::radio::{CellConfig, McsTable, PropagationParams, TopologyConfig, UeRadioConfig};

/// Which delivery pipeline the scenario exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeliveryMode {
    /// Every UE runs an adaptive unicast (DASH) session.
    #[serde(rename = "ptp")]
    Ptp,
    /// One multicast stream, everyone subscribes.
    #[serde(rename = "ptm")]
    Ptm,
    /// Multicast plus per-UE multi-link duplication/merge.
    #[serde(rename = "ptm-ml")]
    PtmMl,
    /// Audience-driven unicast/broadcast switching.
    #[serde(rename = "mood")]
    Mood,
    /// Object-based session: per-object mode assignment and composition.
    #[serde(rename = "object")]
    Object,
}

impl std::fmt::Display for DeliveryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DeliveryMode::Ptp => "ptp",
            DeliveryMode::Ptm => "ptm",
            DeliveryMode::PtmMl => "ptm-ml",
            DeliveryMode::Mood => "mood",
            DeliveryMode::Object => "object",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSection {
    pub carrier_freq_ghz: f64,
    pub tx_power_dbm: f64,
    pub bandwidth_mhz: f64,
    pub element_gain_dbi: f64,
    pub beamwidth_azimuth_deg: f64,
    pub beamwidth_elevation_deg: f64,
    pub electrical_downtilt_deg: f64,
    pub cell_noise_figure_db: f64,
    pub ue_noise_figure_db: f64,
    pub site_height_m: f64,
    pub ue_height_m: f64,
    pub ue_speed_kmph: f64,
    pub unicast_bf_gain_db: f64,
    pub pathloss_exponent: f64,
    pub pathloss_intercept_db: f64,
    pub shadowing_sigma_db: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        let c = CellConfig::default();
        let u = UeRadioConfig::default();
        let p = PropagationParams::default();
        RadioSection {
            carrier_freq_ghz: c.carrier_freq_ghz,
            tx_power_dbm: c.tx_power_dbm,
            bandwidth_mhz: c.bandwidth_mhz,
            element_gain_dbi: c.element_gain_dbi,
            beamwidth_azimuth_deg: c.beamwidth_azimuth_deg,
            beamwidth_elevation_deg: c.beamwidth_elevation_deg,
            electrical_downtilt_deg: c.electrical_downtilt_deg,
            cell_noise_figure_db: c.noise_figure_db,
            ue_noise_figure_db: u.noise_figure_db,
            site_height_m: c.site_height_m,
            ue_height_m: u.height_m,
            ue_speed_kmph: u.speed_kmph,
            unicast_bf_gain_db: c.unicast_bf_gain_db,
            pathloss_exponent: p.exponent,
            pathloss_intercept_db: p.intercept_db,
            shadowing_sigma_db: p.shadowing_sigma_db,
        }
    }
}

impl RadioSection {
    pub fn cell_config(&self) -> CellConfig {
        CellConfig {
            carrier_freq_ghz: self.carrier_freq_ghz,
            tx_power_dbm: self.tx_power_dbm,
            bandwidth_mhz: self.bandwidth_mhz,
            element_gain_dbi: self.element_gain_dbi,
            beamwidth_azimuth_deg: self.beamwidth_azimuth_deg,
            beamwidth_elevation_deg: self.beamwidth_elevation_deg,
            electrical_downtilt_deg: self.electrical_downtilt_deg,
            noise_figure_db: self.cell_noise_figure_db,
            site_height_m: self.site_height_m,
            unicast_bf_gain_db: self.unicast_bf_gain_db,
        }
    }

    pub fn ue_config(&self) -> UeRadioConfig {
        UeRadioConfig {
            noise_figure_db: self.ue_noise_figure_db,
            speed_kmph: self.ue_speed_kmph,
            height_m: self.ue_height_m,
        }
    }

    pub fn propagation(&self) -> PropagationParams {
        PropagationParams {
            exponent: self.pathloss_exponent,
            intercept_db: self.pathloss_intercept_db,
            reference_distance_m: PropagationParams::default().reference_distance_m,
            shadowing_sigma_db: self.shadowing_sigma_db,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub inter_site_distance_m: f64,
    pub ues_per_cell: usize,
    pub num_ring_cells: usize,
    pub ring_radius_m: f64,
    pub ring_power_offset_db: f64,
    pub deployment_radius_m: f64,
    pub ring_interferes_mbsfn: bool,
}

impl Default for TopologySection {
    fn default() -> Self {
        let t = TopologyConfig::default();
        TopologySection {
            inter_site_distance_m: t.inter_site_distance_m,
            ues_per_cell: t.ues_per_cell,
            num_ring_cells: t.num_ring_cells,
            ring_radius_m: t.ring_radius_m,
            ring_power_offset_db: t.ring_power_offset_db,
            deployment_radius_m: t.deployment_radius_m,
            ring_interferes_mbsfn: t.ring_interferes_mbsfn,
        }
    }
}

impl TopologySection {
    pub fn topology(&self) -> TopologyConfig {
        TopologyConfig {
            inter_site_distance_m: self.inter_site_distance_m,
            ues_per_cell: self.ues_per_cell,
            num_ring_cells: self.num_ring_cells,
            ring_radius_m: self.ring_radius_m,
            ring_power_offset_db: self.ring_power_offset_db,
            deployment_radius_m: self.deployment_radius_m,
            ring_interferes_mbsfn: self.ring_interferes_mbsfn,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContentSection {
    /// Whether the media service runs at all (alert-only scenarios turn it
    /// off).
    pub media_enabled: bool,
    pub segment_duration_ms: u64,
    /// Unicast bitrate ladder; the top rung is the multicast encoding.
    pub ladder: Vec<Rung>,
    /// Pinned MCS index for the multicast stream.
    pub mcast_mcs_index: usize,
    /// Broadcast share of the PRB grid.
    pub mcast_cap_fraction: f64,
    /// Path to a custom MCS table file; empty means the built-in table.
    pub mcs_table_path: String,
}

impl Default for ContentSection {
    fn default() -> Self {
        ContentSection {
            media_enabled: true,
            segment_duration_ms: 1000,
            ladder: default_ladder(),
            mcast_mcs_index: 2,
            mcast_cap_fraction: 0.8,
            mcs_table_path: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoodSection {
    pub activation_threshold: usize,
    pub deactivation_threshold: usize,
    pub eval_interval_s: u64,
    pub switch_latency_s: u64,
    /// Scripted audience: ramps 1 → `audience_max` → 1, one step every
    /// `audience_step_s`. An explicit script overrides the ramp.
    pub audience_max: usize,
    pub audience_step_s: u64,
    pub audience_script: Vec<AudienceStep>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudienceStep {
    pub at_s: u64,
    pub count: usize,
}

impl Default for MoodSection {
    fn default() -> Self {
        MoodSection {
            activation_threshold: 2,
            deactivation_threshold: 1,
            eval_interval_s: 1,
            switch_latency_s: 2,
            audience_max: 3,
            audience_step_s: 10,
            audience_script: Vec::new(),
        }
    }
}

impl MoodSection {
    /// The effective audience timeline: the explicit script if given, else
    /// the symmetric ramp.
    pub fn timeline(&self) -> Vec<AudienceStep> {
        if !self.audience_script.is_empty() {
            return self.audience_script.clone();
        }
        let mut steps = Vec::new();
        let mut t = 0;
        for count in 1..=self.audience_max {
            steps.push(AudienceStep { at_s: t, count });
            t += self.audience_step_s;
        }
        for count in (1..self.audience_max).rev() {
            steps.push(AudienceStep { at_s: t, count });
            t += self.audience_step_s;
        }
        steps
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultilinkSection {
    pub sinr_threshold_db: f64,
    pub hysteresis_margin_db: f64,
    pub reorder_window: u64,
    pub repair_timeout_ms: u64,
    pub repair_enabled: bool,
}

impl Default for MultilinkSection {
    fn default() -> Self {
        let m = crate::multilink::MlConfig::default();
        MultilinkSection {
            sinr_threshold_db: m.sinr_threshold_db,
            hysteresis_margin_db: m.hysteresis_margin_db,
            reorder_window: m.reorder_window,
            repair_timeout_ms: m.repair_timeout.ticks(),
            repair_enabled: m.repair_enabled,
        }
    }
}

impl MultilinkSection {
    pub fn ml_config(&self) -> crate::multilink::MlConfig {
        crate::multilink::MlConfig {
            sinr_threshold_db: self.sinr_threshold_db,
            hysteresis_margin_db: self.hysteresis_margin_db,
            reorder_window: self.reorder_window,
            repair_timeout: SimTime::from_ms(self.repair_timeout_ms),
            repair_enabled: self.repair_enabled,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClientSection {
    pub initial_buffer_target_s: f64,
    pub max_buffer_s: f64,
    pub quit_timer_s: f64,
    pub throughput_ema_alpha: f64,
    pub safety_factor: f64,
    pub panic_buffer_s: f64,
    pub request_latency_ms: u64,
}

impl Default for ClientSection {
    fn default() -> Self {
        let c = crate::client::ClientConfig::default();
        ClientSection {
            initial_buffer_target_s: c.initial_buffer_target_s,
            max_buffer_s: c.max_buffer_s,
            quit_timer_s: c.quit_timer_s,
            throughput_ema_alpha: c.throughput_ema_alpha,
            safety_factor: c.safety_factor,
            panic_buffer_s: c.panic_buffer_s,
            request_latency_ms: c.request_latency.ticks(),
        }
    }
}

impl ClientSection {
    pub fn client_config(&self) -> crate::client::ClientConfig {
        crate::client::ClientConfig {
            initial_buffer_target_s: self.initial_buffer_target_s,
            max_buffer_s: self.max_buffer_s,
            quit_timer_s: self.quit_timer_s,
            throughput_ema_alpha: self.throughput_ema_alpha,
            safety_factor: self.safety_factor,
            panic_buffer_s: self.panic_buffer_s,
            request_latency: SimTime::from_ms(self.request_latency_ms),
            cancel_no_improvement_lead_s: crate::client::ClientConfig::default()
                .cancel_no_improvement_lead_s,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QoeSection {
    pub window_segments: usize,
}

impl Default for QoeSection {
    fn default() -> Self {
        QoeSection {
            window_segments: crate::kpi::QoeConfig::default().window_segments,
        }
    }
}

/// Public-warning alert delivery: a file broadcast cyclically over multicast
/// for capable UEs; non-capable UEs (and capable stragglers after the last
/// round) fetch it over unicast.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlertSection {
    pub enabled: bool,
    pub trigger_s: u64,
    pub file_bytes: u64,
    pub carousel_rounds: u32,
    /// Robust pinned MCS for the carousel.
    pub mcs_index: usize,
    pub non_capable_ues: Vec<usize>,
    pub unicast_fallback: bool,
}

impl Default for AlertSection {
    fn default() -> Self {
        AlertSection {
            enabled: false,
            trigger_s: 10,
            file_bytes: 20_000,
            carousel_rounds: 3,
            mcs_index: 0,
            non_capable_ues: Vec::new(),
            unicast_fallback: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectsSection {
    pub heavy_threshold_bps: u64,
    pub objects: Vec<MediaObject>,
}

impl Default for ObjectsSection {
    fn default() -> Self {
        ObjectsSection {
            heavy_threshold_bps: 1_000_000,
            objects: Vec::new(),
        }
    }
}

/// Blocks all unicast delivery to one UE during a window (scripted
/// starvation).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outage {
    pub ue: usize,
    pub from_s: u64,
    pub to_s: u64,
}

/// Scripted multicast loss: drop the next `packets` multicast packets this UE
/// would otherwise decode, starting at `at_s`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBurst {
    pub at_s: u64,
    pub ue: usize,
    pub packets: u64,
}

/// Deterministic placement override for one UE (edge-UE scenarios).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub ue: usize,
    pub radius_m: f64,
    pub angle_deg: f64,
    pub heading_deg: f64,
    /// Pins the shadowing term for reproducible edge geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadowing_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub preset: String,
    pub mode: DeliveryMode,
    pub seed: u64,
    pub duration_s: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub radio: RadioSection,
    pub topology: TopologySection,
    pub content: ContentSection,
    pub mood: MoodSection,
    pub multilink: MultilinkSection,
    pub client: ClientSection,
    pub qoe: QoeSection,
    pub alert: AlertSection,
    pub objects: ObjectsSection,
    pub outages: Vec<Outage>,
    pub loss_bursts: Vec<LossBurst>,
    pub placements: Vec<Placement>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            preset: "custom".to_string(),
            mode: DeliveryMode::Ptp,
            seed: 1,
            duration_s: 300,
            out_dir: None,
            radio: RadioSection::default(),
            topology: TopologySection::default(),
            content: ContentSection::default(),
            mood: MoodSection::default(),
            multilink: MultilinkSection::default(),
            client: ClientSection::default(),
            qoe: QoeSection::default(),
            alert: AlertSection::default(),
            objects: ObjectsSection::default(),
            outages: Vec::new(),
            loss_bursts: Vec::new(),
            placements: Vec::new(),
        }
    }
}

pub const PRESET_NAMES: [&str; 6] = [
    "ptp-only",
    "ptm-only",
    "ptm-multilink",
    "mood-demo",
    "pw-alert",
    "object-based",
];

/// Look up a built-in preset by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let mut cfg = ScenarioConfig {
        preset: name.to_string(),
        ..ScenarioConfig::default()
    };
    match name {
        "ptp-only" => {
            cfg.mode = DeliveryMode::Ptp;
        }
        "ptm-only" => {
            cfg.mode = DeliveryMode::Ptm;
            cfg.content.mcast_mcs_index = 2;
        }
        "ptm-multilink" => {
            cfg.mode = DeliveryMode::PtmMl;
            cfg.content.mcast_mcs_index = 4;
        }
        "mood-demo" => {
            cfg.mode = DeliveryMode::Mood;
            cfg.duration_s = 120;
            cfg.topology.ues_per_cell = 2; // 6 candidate viewers
            cfg.mood.audience_max = 3;
        }
        "pw-alert" => {
            cfg.mode = DeliveryMode::Ptm;
            cfg.duration_s = 60;
            cfg.content.media_enabled = false;
            cfg.alert = AlertSection {
                enabled: true,
                trigger_s: 10,
                file_bytes: 20_000,
                carousel_rounds: 3,
                mcs_index: 0,
                non_capable_ues: vec![4, 11, 23],
                unicast_fallback: true,
            };
            // One deliberate multicast-edge UE pinned at the deployment rim.
            cfg.placements = vec![Placement {
                ue: 7,
                radius_m: 152.0,
                angle_deg: 15.0,
                heading_deg: 200.0,
                shadowing_db: Some(0.0),
            }];
        }
        "object-based" => {
            cfg.mode = DeliveryMode::Object;
            cfg.duration_s = 60;
            cfg.objects = ObjectsSection {
                heavy_threshold_bps: 1_000_000,
                objects: vec![
                    MediaObject {
                        object_id: "main-video".to_string(),
                        bitrate_bps: 20_000_000,
                        popularity: Popularity::Shared,
                    },
                    MediaObject {
                        object_id: "personal-overlay".to_string(),
                        bitrate_bps: 400_000,
                        popularity: Popularity::Personalized,
                    },
                ],
            };
        }
        _ => return None,
    }
    Some(cfg)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<ScenarioConfig, SimError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ScenarioConfig, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::io(path.display().to_string(), e))?;
        ScenarioConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn num_ues(&self) -> usize {
        self.topology.ues_per_cell * crate::radio::NUM_SIMULATED_CELLS
    }

    pub fn mcs_table(&self) -> Result<McsTable, SimError> {
        if self.content.mcs_table_path.is_empty() {
            Ok(McsTable::builtin())
        } else {
            McsTable::load(std::path::Path::new(&self.content.mcs_table_path))
        }
    }

    pub fn segment_duration(&self) -> SimTime {
        SimTime::from_ms(self.content.segment_duration_ms)
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.radio.bandwidth_mhz * 1e6
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::Config(msg));
        if self.duration_s == 0 {
            return fail("duration_s must be positive".into());
        }
        if self.topology.ues_per_cell == 0 {
            return fail("topology.ues_per_cell must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.content.mcast_cap_fraction)
            || self.content.mcast_cap_fraction == 0.0
        {
            return fail(format!(
                "content.mcast_cap_fraction must be in (0, 1], got {}",
                self.content.mcast_cap_fraction
            ));
        }
        if self.content.segment_duration_ms == 0 {
            return fail("content.segment_duration_ms must be positive".into());
        }
        if self.content.ladder.is_empty() {
            return fail("content.ladder must have at least one rung".into());
        }
        for w in self.content.ladder.windows(2) {
            if w[1].bits_per_s <= w[0].bits_per_s {
                return fail("content.ladder bitrates must be strictly increasing".into());
            }
        }
        let table = self.mcs_table()?;
        if table.entry(self.content.mcast_mcs_index).is_none() {
            return fail(format!(
                "content.mcast_mcs_index {} out of range (table has {} entries)",
                self.content.mcast_mcs_index,
                table.len()
            ));
        }
        if self.alert.enabled && table.entry(self.alert.mcs_index).is_none() {
            return fail(format!("alert.mcs_index {} out of range", self.alert.mcs_index));
        }
        if self.mood.deactivation_threshold >= self.mood.activation_threshold {
            return fail("mood thresholds must satisfy deactivation < activation".into());
        }
        if self.mood.eval_interval_s == 0 {
            return fail("mood.eval_interval_s must be positive".into());
        }
        if self.multilink.reorder_window == 0 {
            return fail("multilink.reorder_window must be at least 1".into());
        }
        if self.client.initial_buffer_target_s <= 0.0
            || self.client.initial_buffer_target_s > self.client.max_buffer_s
        {
            return fail("client buffer targets must satisfy 0 < initial <= max".into());
        }
        if self.qoe.window_segments == 0 {
            return fail("qoe.window_segments must be at least 1".into());
        }
        let n = self.num_ues();
        for ue in &self.alert.non_capable_ues {
            if *ue >= n {
                return fail(format!("alert.non_capable_ues: UE {ue} out of range (0..{n})"));
            }
        }
        for o in &self.outages {
            if o.ue >= n {
                return fail(format!("outages: UE {} out of range (0..{n})", o.ue));
            }
            if o.to_s <= o.from_s {
                return fail("outages: to_s must be after from_s".into());
            }
        }
        for b in &self.loss_bursts {
            if b.ue >= n {
                return fail(format!("loss_bursts: UE {} out of range (0..{n})", b.ue));
            }
        }
        for p in &self.placements {
            if p.ue >= n {
                return fail(format!("placements: UE {} out of range (0..{n})", p.ue));
            }
            if p.radius_m > self.topology.deployment_radius_m {
                return fail(format!(
                    "placements: UE {} outside the deployment radius",
                    p.ue
                ));
            }
        }
        if self.mode == DeliveryMode::Mood {
            let timeline = self.mood.timeline();
            if timeline.is_empty() {
                return fail("mood scenarios need a non-empty audience timeline".into());
            }
            for s in &timeline {
                if s.count > n {
                    return fail(format!(
                        "audience count {} exceeds UE population {n}",
                        s.count
                    ));
                }
            }
        }
        if self.mode == DeliveryMode::Object && self.objects.objects.is_empty() {
            return fail("object scenarios need at least one object".into());
        }
        Ok(())
    }
}
