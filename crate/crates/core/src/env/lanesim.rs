//! LaneSim: a deterministic single-lane driving scenario.
//!
//! The ego vehicle (EV) is driven by a rule-based controller whose perception
//! degrades with fog, rain and darkness. The search controls the vehicle in
//! front (VIF), a pedestrian, and the weather, fog and light levels.
//!
//! Kinematics run in road coordinates: `s` is arc length along the lane
//! centre line and `e` the lateral offset, positive to the left.

use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::EnvAction;
use crate::env::rewards::{normalized_distance, reward_distance, reward_traffic_light};
use crate::env::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::reward::RewardVector;
use crate::scalar::Scalar;
use crate::state::{grid_cell, DiscretizedState, PedestrianState, Tenths, VehicleState};

/// Objective names, in objective-index order.
pub const LANESIM_OBJECTIVES: [&str; 6] = [
    "lane_departure",
    "vif_collision",
    "pedestrian_collision",
    "static_collision",
    "destination_timeout",
    "red_light",
];

const CAR_LENGTH: f64 = 4.5;
const CAR_WIDTH: f64 = 1.8;
const PED_RADIUS: f64 = 0.3;
const POLE_RADIUS: f64 = 0.3;
/// Distances are divided by this before the `1/d` reward.
const DISTANCE_SCALE: f64 = 50.0;
/// Beyond this lateral distance past the lane edge the episode ends.
const RECOVERY_MARGIN: f64 = 1.5;
const FOOTPATH_INNER: f64 = 0.25;
const FOOTPATH_OUTER: f64 = 3.25;

// Ego controller.
const EV_MAX_BRAKE: f64 = 6.0;
const EV_MAX_ACCEL: f64 = 2.0;
const SPEED_GAIN: f64 = 0.8;
const GAP_GAIN: f64 = 0.5;
const CLOSING_GAIN: f64 = 1.0;
const MIN_GAP: f64 = 2.0;
const HEADWAY_S: f64 = 0.8;
const PED_STOP_MARGIN: f64 = 2.0;
const PATH_HALF_WIDTH: f64 = 1.5;
const LANE_GAIN: f64 = 1.0;
const WIND_DRIFT: f64 = 0.5;
const CURVE_DRIFT: f64 = 0.5;

// Vehicle in front.
const VIF_THROTTLE_ACCEL: f64 = 8.0;
const VIF_DRAG: f64 = 0.5;
const VIF_STEER_GAIN: f64 = 1.0;
/// Braking applied once the throttle is fully released.
const VIF_RELEASE_BRAKE: f64 = 4.0;

// Pedestrian.
const PED_MIN_SPEED: f64 = 0.3;
const PED_MAX_SPEED: f64 = 1.5;
/// The pedestrian may not step into the ego path closer than this ahead of it.
const PED_ENTRY_CLEARANCE: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadType {
    Straight,
    LeftTurn,
    RightTurn,
}

impl FromStr for RoadType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(RoadType::Straight),
            "left" | "left_turn" => Ok(RoadType::LeftTurn),
            "right" | "right_turn" => Ok(RoadType::RightTurn),
            _ => Err(Error::Config(format!("unknown road type `{s}`"))),
        }
    }
}

impl RoadType {
    pub fn id_suffix(self) -> &'static str {
        match self {
            RoadType::Straight => "straight",
            RoadType::LeftTurn => "left",
            RoadType::RightTurn => "right",
        }
    }
}

/// Traffic light timing in seconds. The cycle is green, yellow, red.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LightCycle {
    pub green_s: f64,
    pub yellow_s: f64,
    pub red_s: f64,
    pub offset_s: f64,
}

impl Default for LightCycle {
    fn default() -> Self {
        Self { green_s: 13.0, yellow_s: 3.0, red_s: 10.0, offset_s: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LightPhase {
    Green,
    Yellow,
    Red,
}

impl LightCycle {
    pub fn phase(&self, t: f64) -> LightPhase {
        let period = self.green_s + self.yellow_s + self.red_s;
        let c = (t + self.offset_s).rem_euclid(period);
        if c < self.green_s {
            LightPhase::Green
        } else if c < self.green_s + self.yellow_s {
            LightPhase::Yellow
        } else {
            LightPhase::Red
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneSimConfig {
    pub road: RoadType,
    pub lane_width_m: f64,
    pub road_length_m: f64,
    /// Centre-to-centre distance from the EV to the VIF at reset.
    pub vif_gap_m: f64,
    /// Longitudinal distance from the EV to the pedestrian at reset.
    pub ped_offset_m: f64,
    pub initial_weather: f64,
    pub initial_fog: f64,
    pub initial_light: f64,
    pub initial_speed_mps: f64,
    pub initial_vif_throttle: f64,
    pub initial_ped_speed_mps: f64,
    pub target_speed_mps: f64,
    /// Perception range in perfect visibility.
    pub perception_range_m: f64,
    /// Half opening angle of the front camera. The VIF is only perceived
    /// while its centre is inside the frame.
    pub camera_half_fov_deg: f64,
    /// How far the VIF may wander from the lane centre.
    pub vif_lateral_limit_m: f64,
    pub traffic_light_m: f64,
    pub light_cycle: LightCycle,
    /// Arc-length position of the roadside sign.
    pub static_mesh_m: f64,
    /// Lateral distance of roadside sign and light pole from the lane centre
    /// (on the footpath side).
    pub static_mesh_offset_m: f64,
    pub turn_start_m: f64,
    pub turn_radius_m: f64,
    pub j_max: usize,
    pub dt: f64,
}

impl Default for LaneSimConfig {
    fn default() -> Self {
        Self {
            road: RoadType::Straight,
            lane_width_m: 3.5,
            road_length_m: 200.0,
            vif_gap_m: 10.0,
            ped_offset_m: 20.0,
            initial_weather: 0.0,
            initial_fog: 0.0,
            initial_light: 90.0,
            initial_speed_mps: 8.0,
            initial_vif_throttle: 0.5,
            initial_ped_speed_mps: 1.0,
            target_speed_mps: 8.0,
            perception_range_m: 60.0,
            camera_half_fov_deg: 15.0,
            vif_lateral_limit_m: 1.5,
            traffic_light_m: 120.0,
            light_cycle: LightCycle::default(),
            static_mesh_m: 150.0,
            static_mesh_offset_m: 8.0,
            turn_start_m: 80.0,
            turn_radius_m: 40.0,
            j_max: 500,
            dt: 0.1,
        }
    }
}

impl LaneSimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lane_width_m", self.lane_width_m),
            ("road_length_m", self.road_length_m),
            ("vif_gap_m", self.vif_gap_m),
            ("ped_offset_m", self.ped_offset_m),
            ("target_speed_mps", self.target_speed_mps),
            ("perception_range_m", self.perception_range_m),
            ("vif_lateral_limit_m", self.vif_lateral_limit_m),
            ("traffic_light_m", self.traffic_light_m),
            ("static_mesh_m", self.static_mesh_m),
            ("static_mesh_offset_m", self.static_mesh_offset_m),
            ("turn_start_m", self.turn_start_m),
            ("turn_radius_m", self.turn_radius_m),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.camera_half_fov_deg > 0.0 && self.camera_half_fov_deg < 90.0) {
            return Err(Error::Config("camera_half_fov_deg must lie in (0, 90)".into()));
        }
        if self.j_max == 0 {
            return Err(Error::Config("j_max must be positive".into()));
        }
        if self.vif_gap_m <= CAR_LENGTH {
            return Err(Error::Config("vif_gap_m must exceed the car length".into()));
        }
        let c = &self.light_cycle;
        if !(c.green_s > 0.0 && c.yellow_s >= 0.0 && c.red_s >= 0.0) {
            return Err(Error::Config("light cycle phases must be non-negative with a positive green".into()));
        }
        for (name, v, lo, hi) in [
            ("initial_weather", self.initial_weather, 0.0, 100.0),
            ("initial_fog", self.initial_fog, 0.0, 100.0),
            ("initial_light", self.initial_light, -30.0, 120.0),
        ] {
            if !(lo..=hi).contains(&v) || (v / 2.5).fract() != 0.0 {
                return Err(Error::Config(format!("{name} = {v} must be a multiple of 2.5 in [{lo}, {hi}]")));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_vif_throttle) {
            return Err(Error::Config("initial_vif_throttle must lie in [0, 1]".into()));
        }
        if !(PED_MIN_SPEED..=PED_MAX_SPEED).contains(&self.initial_ped_speed_mps) {
            return Err(Error::Config("initial_ped_speed_mps must lie in [0.3, 1.5]".into()));
        }
        Ok(())
    }

    fn half_lane(&self) -> f64 {
        self.lane_width_m / 2.0
    }

    /// Lateral offset beyond which the EV is off the road for good.
    pub fn out_of_road_offset(&self) -> f64 {
        self.half_lane() + RECOVERY_MARGIN
    }
}

/// Centre-line geometry.
#[derive(Clone, Debug)]
struct Road {
    kind: RoadType,
    turn_start: f64,
    radius: f64,
    /// World bounding box (min_x, max_x, min_y, max_y) used for the grid.
    bbox: (f64, f64, f64, f64),
}

impl Road {
    fn new(cfg: &LaneSimConfig) -> Self {
        let mut road = Road { kind: cfg.road, turn_start: cfg.turn_start_m, radius: cfg.turn_radius_m, bbox: (0.0, 0.0, 0.0, 0.0) };
        let margin = cfg.half_lane() + FOOTPATH_OUTER + 1.0;
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        let samples = cfg.road_length_m.ceil() as usize;
        for i in 0..=samples {
            let (x, y, _) = road.pose(i as f64);
            x0 = x0.min(x - margin);
            x1 = x1.max(x + margin);
            y0 = y0.min(y - margin);
            y1 = y1.max(y + margin);
        }
        road.bbox = (x0, x1, y0, y1);
        road
    }

    fn turn_sign(&self) -> f64 {
        match self.kind {
            RoadType::Straight => 0.0,
            RoadType::LeftTurn => 1.0,
            RoadType::RightTurn => -1.0,
        }
    }

    fn arc_len(&self) -> f64 {
        if self.kind == RoadType::Straight {
            0.0
        } else {
            FRAC_PI_2 * self.radius
        }
    }

    /// World position and heading of the centre line at arc length `s`.
    fn pose(&self, s: f64) -> (f64, f64, f64) {
        let sign = self.turn_sign();
        if sign == 0.0 || s <= self.turn_start {
            return (s, 0.0, 0.0);
        }
        let r = self.radius;
        let along = s - self.turn_start;
        if along <= self.arc_len() {
            let phi = along / r;
            (self.turn_start + r * phi.sin(), sign * (r - r * phi.cos()), sign * phi)
        } else {
            let rest = along - self.arc_len();
            (self.turn_start + r, sign * (r + rest), sign * FRAC_PI_2)
        }
    }

    /// Signed curvature, positive for left turns.
    fn curvature(&self, s: f64) -> f64 {
        let along = s - self.turn_start;
        if self.kind != RoadType::Straight && along > 0.0 && along <= self.arc_len() {
            self.turn_sign() / self.radius
        } else {
            0.0
        }
    }

    fn world(&self, s: f64, e: f64) -> (f64, f64) {
        let (x, y, th) = self.pose(s);
        (x - e * th.sin(), y + e * th.cos())
    }

    /// World-frame vector from road-frame (along, lateral) components.
    fn rotate(&self, s: f64, along: f64, lateral: f64) -> (f64, f64) {
        let th = self.pose(s).2;
        (along * th.cos() - lateral * th.sin(), along * th.sin() + lateral * th.cos())
    }
}

/// Full physical state of a LaneSim episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub ev_s: f64,
    pub ev_e: f64,
    pub ev_v: f64,
    pub ev_lat_v: f64,
    pub ev_world_v: (f64, f64),
    pub ev_world_a: (f64, f64),
    pub vif_s: f64,
    pub vif_e: f64,
    pub vif_v: f64,
    pub vif_throttle: f64,
    pub vif_steer: f64,
    pub vif_world_v: (f64, f64),
    pub vif_world_a: (f64, f64),
    pub ped_s: f64,
    pub ped_e: f64,
    pub ped_dir: (f64, f64),
    pub ped_speed: f64,
    pub ped_world_v: (f64, f64),
    pub weather: f64,
    pub fog: f64,
    pub light: f64,
}

/// Per-objective geometric predicates evaluated independently of rewards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Violations(pub [bool; 6]);

pub struct LaneSim {
    id: String,
    seed: u64,
    cfg: LaneSimConfig,
    road: Road,
    snap: Snapshot,
    initial: Snapshot,
    terminal: bool,
    last_violations: Violations,
}

impl LaneSim {
    pub fn new(cfg: LaneSimConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let road = Road::new(&cfg);
        let initial = Self::initial_snapshot(&cfg, &road);
        let sim = Self {
            id: format!("lanesim:{}", cfg.road.id_suffix()),
            seed,
            cfg,
            road,
            snap: initial.clone(),
            initial,
            terminal: false,
            last_violations: Violations::default(),
        };
        let v = sim.predicates(&sim.initial, sim.initial.ev_s, false);
        if v.0.iter().any(|b| *b) {
            return Err(Error::Config(format!("initial configuration already violates {:?}", v.0)));
        }
        Ok(sim)
    }

    pub fn config(&self) -> &LaneSimConfig {
        &self.cfg
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snap
    }

    /// Predicates that held at the last performed step.
    pub fn last_violations(&self) -> Violations {
        self.last_violations
    }

    fn initial_snapshot(cfg: &LaneSimConfig, road: &Road) -> Snapshot {
        let ped_e = -(cfg.half_lane() + (FOOTPATH_INNER + FOOTPATH_OUTER) / 2.0);
        let v = cfg.initial_speed_mps;
        let vif_v = (VIF_THROTTLE_ACCEL * cfg.initial_vif_throttle / VIF_DRAG).min(v.max(0.0)).max(0.0);
        let vif_v = if cfg.initial_vif_throttle > 0.0 { vif_v } else { 0.0 };
        let ped_dir = (1.0, 0.0);
        Snapshot {
            step: 0,
            ev_s: 0.0,
            ev_e: 0.0,
            ev_v: v,
            ev_lat_v: 0.0,
            ev_world_v: road.rotate(0.0, v, 0.0),
            ev_world_a: (0.0, 0.0),
            vif_s: cfg.vif_gap_m,
            vif_e: 0.0,
            vif_v,
            vif_throttle: cfg.initial_vif_throttle,
            vif_steer: 0.0,
            vif_world_v: road.rotate(cfg.vif_gap_m, vif_v, 0.0),
            vif_world_a: (0.0, 0.0),
            ped_s: cfg.ped_offset_m,
            ped_e,
            ped_dir,
            ped_speed: cfg.initial_ped_speed_mps,
            ped_world_v: road.rotate(cfg.ped_offset_m, ped_dir.0 * cfg.initial_ped_speed_mps, 0.0),
            weather: cfg.initial_weather,
            fog: cfg.initial_fog,
            light: cfg.initial_light,
        }
    }

    /// Fraction of perfect-weather perception available, in `(0, 1]`.
    pub fn visibility(fog: f64, weather: f64, light: f64) -> f64 {
        let fog_f = 1.0 - 0.009 * fog;
        let rain_f = 1.0 - 0.004 * weather;
        let altitude = light.min(180.0 - light);
        let light_f = (0.25 + 0.75 * (altitude + 30.0) / 40.0).clamp(0.25, 1.0);
        (fog_f * rain_f * light_f).clamp(0.01, 1.0)
    }

    pub fn perception_range(&self) -> f64 {
        let s = &self.snap;
        self.cfg.perception_range_m * Self::visibility(s.fog, s.weather, s.light)
    }

    fn time(&self, step: usize) -> f64 {
        step as f64 * self.cfg.dt
    }

    fn apply_action(&mut self, action: EnvAction) {
        let s = &mut self.snap;
        match action {
            EnvAction::ThrottleUp => s.vif_throttle = round_to(s.vif_throttle + 0.1, 10.0).min(1.0),
            EnvAction::ThrottleDown => s.vif_throttle = round_to(s.vif_throttle - 0.1, 10.0).max(0.0),
            EnvAction::SteerUp => s.vif_steer = round_to(s.vif_steer + 0.01, 100.0).min(1.0),
            EnvAction::SteerDown => s.vif_steer = round_to(s.vif_steer - 0.01, 100.0).max(-1.0),
            EnvAction::LightUp => s.light = (s.light + 2.5).min(120.0),
            EnvAction::LightDown => s.light = (s.light - 2.5).max(-30.0),
            EnvAction::WeatherUp => s.weather = (s.weather + 2.5).min(100.0),
            EnvAction::WeatherDown => s.weather = (s.weather - 2.5).max(0.0),
            EnvAction::FogUp => s.fog = (s.fog + 2.5).min(100.0),
            EnvAction::FogDown => s.fog = (s.fog - 2.5).max(0.0),
            EnvAction::PedSpeedUp => s.ped_speed = round_to(s.ped_speed + 0.05, 100.0).min(PED_MAX_SPEED),
            EnvAction::PedSpeedDown => s.ped_speed = round_to(s.ped_speed - 0.05, 100.0).max(PED_MIN_SPEED),
            EnvAction::PedDirXUp => s.ped_dir = turn_heading(s.ped_dir, 0.1, 0.0),
            EnvAction::PedDirXDown => s.ped_dir = turn_heading(s.ped_dir, -0.1, 0.0),
            EnvAction::PedDirYUp => s.ped_dir = turn_heading(s.ped_dir, 0.0, 0.1),
            EnvAction::PedDirYDown => s.ped_dir = turn_heading(s.ped_dir, 0.0, -0.1),
            EnvAction::NoOp => {}
        }
    }

    /// Longitudinal acceleration commanded by the ego controller for the
    /// world as it perceives it.
    fn controller_accel(&self) -> f64 {
        let s = &self.snap;
        let vis = Self::visibility(s.fog, s.weather, s.light);
        let range = self.cfg.perception_range_m * vis;
        // Poor visibility makes the controller overestimate distances and
        // underestimate closing speeds.
        let bias = 1.0 / vis.sqrt();
        let v = s.ev_v;
        let front = s.ev_s + CAR_LENGTH / 2.0;

        let mut a = SPEED_GAIN * (self.cfg.target_speed_mps - v);

        let ds = s.vif_s - s.ev_s;
        let gap = ds - CAR_LENGTH;
        let off = (s.vif_e - s.ev_e).abs();
        let in_frame = off <= (ds - CAR_LENGTH / 2.0).max(0.0) * self.cfg.camera_half_fov_deg.to_radians().tan();
        if ds > 0.0 && off < CAR_WIDTH + 0.2 && in_frame && gap < range {
            let wanted = MIN_GAP + HEADWAY_S * v;
            let follow = GAP_GAIN * (gap * bias - wanted) + CLOSING_GAIN * (s.vif_v - v) / bias;
            a = a.min(follow);
        }

        let dp = s.ped_s - front;
        if dp > -PED_RADIUS && (s.ped_e - s.ev_e).abs() < PATH_HALF_WIDTH && dp < range {
            let room = (dp * bias - PED_STOP_MARGIN).max(0.05);
            a = a.min(-v * v / (2.0 * room));
        }

        let dl = self.cfg.traffic_light_m - front;
        let t = self.time(s.step);
        if dl > 0.0 && dl < range && self.cfg.light_cycle.phase(t) != LightPhase::Green {
            let need = v * v / (2.0 * (dl * bias - 0.5).max(0.05));
            if need <= EV_MAX_BRAKE {
                a = a.min(-need);
            }
        }

        a.clamp(-EV_MAX_BRAKE, EV_MAX_ACCEL)
    }

    fn advance(&mut self) {
        let dt = self.cfg.dt;
        let accel = self.controller_accel();
        let road = &self.road;
        let target = self.cfg.target_speed_mps;
        let s = &mut self.snap;

        // Ego vehicle.
        let vis = Self::visibility(s.fog, s.weather, s.light);
        let marking = vis.sqrt();
        let v_new = (s.ev_v + accel * dt).max(0.0);
        let drift = -WIND_DRIFT * s.weather / 100.0 - road.curvature(s.ev_s) * v_new * v_new * CURVE_DRIFT * (1.0 - marking);
        let speed_factor = (v_new / target).min(1.0);
        let lat_v = (-LANE_GAIN * marking * s.ev_e + drift) * speed_factor;
        s.ev_v = v_new;
        s.ev_s += v_new * dt;
        s.ev_e += lat_v * dt;
        s.ev_lat_v = lat_v;
        let w = road.rotate(s.ev_s, v_new, lat_v);
        s.ev_world_a = ((w.0 - s.ev_world_v.0) / dt, (w.1 - s.ev_world_v.1) / dt);
        s.ev_world_v = w;

        // Vehicle in front: speed never drops below zero and it stays near
        // the lane centre.
        let mut a_vif = VIF_THROTTLE_ACCEL * s.vif_throttle - VIF_DRAG * s.vif_v;
        if s.vif_throttle <= 0.0 {
            a_vif -= VIF_RELEASE_BRAKE;
        }
        let vif_v = (s.vif_v + a_vif * dt).max(0.0);
        s.vif_v = vif_v;
        s.vif_s += vif_v * dt;
        let limit = self.cfg.vif_lateral_limit_m;
        let e_new = (s.vif_e + vif_v * s.vif_steer * VIF_STEER_GAIN * dt).clamp(-limit, limit);
        let vif_lat_v = (e_new - s.vif_e) / dt;
        s.vif_e = e_new;
        let w = road.rotate(s.vif_s, vif_v, vif_lat_v);
        s.vif_world_a = ((w.0 - s.vif_world_v.0) / dt, (w.1 - s.vif_world_v.1) / dt);
        s.vif_world_v = w;

        // Pedestrian: blocked from stepping into the ego path right in front
        // of the EV and from walking into the EV.
        let lane_edge = self.cfg.lane_width_m / 2.0;
        let (dx, dy) = (s.ped_dir.0 * s.ped_speed * dt, s.ped_dir.1 * s.ped_speed * dt);
        let mut ns = (s.ped_s + dx).max(0.0);
        let mut ne = (s.ped_e + dy).clamp(-(lane_edge + FOOTPATH_OUTER), lane_edge);
        let ahead = s.ped_s - (s.ev_s + CAR_LENGTH / 2.0);
        let entering_path = (ne - s.ev_e).abs() < PATH_HALF_WIDTH && (s.ped_e - s.ev_e).abs() >= PATH_HALF_WIDTH;
        if entering_path && ahead > -CAR_LENGTH && ahead < PED_ENTRY_CLEARANCE {
            ne = s.ped_e;
        }
        if rect_circle_clearance(s.ev_s - ns, s.ev_e - ne, PED_RADIUS + 0.2) <= 0.0 {
            ns = s.ped_s;
            ne = s.ped_e;
        }
        let moved = ((ns - s.ped_s) / dt, (ne - s.ped_e) / dt);
        s.ped_s = ns;
        s.ped_e = ne;
        s.ped_world_v = road.rotate(ns, moved.0, moved.1);

        s.step += 1;
    }

    /// Geometric violation predicates for `snap`, given the EV front
    /// position before the step (for stop-line crossing).
    fn predicates(&self, snap: &Snapshot, prev_ev_s: f64, timed_out: bool) -> Violations {
        let cfg = &self.cfg;
        let lane = snap.ev_e.abs() >= cfg.half_lane() - CAR_WIDTH / 2.0;
        let vif = (snap.vif_s - snap.ev_s).abs() <= CAR_LENGTH && (snap.vif_e - snap.ev_e).abs() <= CAR_WIDTH;
        let ped = rect_circle_clearance(snap.ev_s - snap.ped_s, snap.ev_e - snap.ped_e, PED_RADIUS) <= 0.0;
        let mesh = self
            .meshes()
            .iter()
            .any(|&(ms, me)| rect_circle_clearance(snap.ev_s - ms, snap.ev_e - me, POLE_RADIUS) <= 0.0);
        let arrived = snap.ev_s >= cfg.road_length_m;
        let timeout = timed_out && !arrived;
        let line = cfg.traffic_light_m;
        let crossed = prev_ev_s + CAR_LENGTH / 2.0 < line && snap.ev_s + CAR_LENGTH / 2.0 >= line;
        let red = crossed && cfg.light_cycle.phase(self.time(snap.step)) == LightPhase::Red;
        Violations([lane, vif, ped, mesh, timeout, red])
    }

    /// Static roadside objects: the sign and the traffic light pole.
    fn meshes(&self) -> [(f64, f64); 2] {
        let e = -self.cfg.static_mesh_offset_m;
        [(self.cfg.static_mesh_m, e), (self.cfg.traffic_light_m, e)]
    }

    /// Distance-based rewards; computed from clearances, never from the
    /// predicates above.
    fn rewards(&self, snap: &Snapshot, red_light: bool, timed_out: bool) -> Result<[f64; 6]> {
        let cfg = &self.cfg;
        let margin = cfg.half_lane() - CAR_WIDTH / 2.0;
        let d_lane = ((margin - snap.ev_e.abs()) / margin).clamp(0.0, 1.0);
        let d_lane = if d_lane > 0.0 { normalized_distance(d_lane, 1.0) } else { 0.0 };

        let lon = ((snap.vif_s - snap.ev_s).abs() - CAR_LENGTH).max(0.0);
        let lat = ((snap.vif_e - snap.ev_e).abs() - CAR_WIDTH).max(0.0);
        let d_vif = normalized_distance(lon.hypot(lat), DISTANCE_SCALE);

        let d_ped =
            normalized_distance(rect_circle_clearance(snap.ev_s - snap.ped_s, snap.ev_e - snap.ped_e, PED_RADIUS), DISTANCE_SCALE);

        let mesh_clearance = self
            .meshes()
            .iter()
            .map(|&(ms, me)| rect_circle_clearance(snap.ev_s - ms, snap.ev_e - me, POLE_RADIUS))
            .fold(f64::INFINITY, f64::min);
        let d_mesh = normalized_distance(mesh_clearance, DISTANCE_SCALE);

        let total_time = cfg.j_max as f64 * cfg.dt;
        let d_dest = if timed_out && snap.ev_s < cfg.road_length_m {
            0.0
        } else {
            let left = (cfg.j_max - snap.step.min(cfg.j_max)) as f64 * cfg.dt;
            let need = (cfg.road_length_m - snap.ev_s).max(0.0) / cfg.target_speed_mps;
            normalized_distance((left - need).max(0.0), total_time).max(crate::env::MIN_NORMALIZED_DISTANCE)
        };

        Ok([
            reward_distance(d_lane)?,
            reward_distance(d_vif)?,
            reward_distance(d_ped)?,
            reward_distance(d_mesh)?,
            reward_distance(d_dest)?,
            reward_traffic_light(red_light),
        ])
    }

    fn discretize(&self) -> DiscretizedState {
        let s = &self.snap;
        let (bx0, bx1, by0, by1) = self.road.bbox;
        let (ex, ey) = self.road.world(s.ev_s, s.ev_e);
        let (vx, vy) = self.road.world(s.vif_s, s.vif_e);
        let (rx, ry) = (vx - ex, vy - ey);
        DiscretizedState {
            ev: VehicleState {
                grid_x: grid_cell(ex, bx0, bx1),
                grid_y: grid_cell(ey, by0, by1),
                vx: Tenths::quantize(s.ev_world_v.0),
                vy: Tenths::quantize(s.ev_world_v.1),
                ax: Tenths::quantize(s.ev_world_a.0),
                ay: Tenths::quantize(s.ev_world_a.1),
            },
            vif: VehicleState {
                grid_x: grid_cell(rx, -50.0, 50.0),
                grid_y: grid_cell(ry, -50.0, 50.0),
                vx: Tenths::quantize(s.vif_world_v.0 - s.ev_world_v.0),
                vy: Tenths::quantize(s.vif_world_v.1 - s.ev_world_v.1),
                ax: Tenths::quantize(s.vif_world_a.0 - s.ev_world_a.0),
                ay: Tenths::quantize(s.vif_world_a.1 - s.ev_world_a.1),
            },
            ped: PedestrianState {
                dir_x: Tenths::quantize(s.ped_dir.0),
                dir_y: Tenths::quantize(s.ped_dir.1),
                vx: Tenths::quantize(s.ped_world_v.0),
                vy: Tenths::quantize(s.ped_world_v.1),
            },
            weather: Tenths::quantize_step(s.weather, 2.5),
            fog: Tenths::quantize_step(s.fog, 2.5),
            light: Tenths::quantize_step(s.light, 2.5),
        }
    }
}

impl<T: Scalar> Environment<T> for LaneSim {
    fn env_id(&self) -> &str {
        &self.id
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn n_objectives(&self) -> usize {
        LANESIM_OBJECTIVES.len()
    }

    fn j_max(&self) -> usize {
        self.cfg.j_max
    }

    fn actions(&self) -> &[EnvAction] {
        &EnvAction::ALL
    }

    fn reset(&mut self) -> DiscretizedState {
        self.snap = self.initial.clone();
        self.terminal = false;
        self.last_violations = Violations::default();
        self.discretize()
    }

    fn observe(&self) -> DiscretizedState {
        self.discretize()
    }

    fn perform(&mut self, action: EnvAction) -> Result<StepOutcome<T>> {
        if self.terminal {
            return Err(Error::Contract(format!("perform({action}) after the episode ended")));
        }
        let prev_ev_s = self.snap.ev_s;
        self.apply_action(action);
        self.advance();
        let timed_out = self.snap.step >= self.cfg.j_max;
        let v = self.predicates(&self.snap, prev_ev_s, timed_out);
        let raw = self.rewards(&self.snap, v.0[5], timed_out)?;
        self.last_violations = v;
        let [_, vif, ped, mesh, _, _] = v.0;
        let arrived = self.snap.ev_s >= self.cfg.road_length_m;
        let off_road = self.snap.ev_e.abs() > self.cfg.out_of_road_offset();
        self.terminal = vif || ped || mesh || arrived || off_road || timed_out;

        let rewards = RewardVector::new(raw.iter().map(|&r| T::of(r)).collect())?;
        let raw = if v.0[5] {
            let mut binary = raw;
            binary[5] = 1.0;
            Some(RewardVector::new(binary.iter().map(|&r| T::of(r)).collect())?)
        } else {
            None
        };
        Ok(StepOutcome { rewards, terminal: self.terminal, raw })
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn steps_taken(&self) -> usize {
        self.snap.step
    }

    fn objective_names(&self) -> Vec<String> {
        LANESIM_OBJECTIVES.iter().map(|s| s.to_string()).collect()
    }
}

fn round_to(x: f64, per_unit: f64) -> f64 {
    (x * per_unit).round() / per_unit
}

/// Adds a delta to a heading and renormalizes; a vanishing heading keeps the
/// previous direction.
fn turn_heading(dir: (f64, f64), dx: f64, dy: f64) -> (f64, f64) {
    let x = (dir.0 + dx).clamp(-1.0, 1.0);
    let y = (dir.1 + dy).clamp(-1.0, 1.0);
    let n = x.hypot(y);
    if n < 1e-9 {
        dir
    } else {
        (x / n, y / n)
    }
}

/// Clearance between the EV footprint (centred at the origin) and a circle
/// whose centre is at `-(ds, de)` relative to the EV.
fn rect_circle_clearance(ds: f64, de: f64, radius: f64) -> f64 {
    let lon = (ds.abs() - CAR_LENGTH / 2.0).max(0.0);
    let lat = (de.abs() - CAR_WIDTH / 2.0).max(0.0);
    lon.hypot(lat) - radius
}
