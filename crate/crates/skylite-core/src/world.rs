//! Ground-truth geometry, propagation, antenna and rate models.
//!
//! Propagation is log-distance path loss anchored at a 1 m free-space
//! reference, plus a fixed attenuation for every obstacle crossed by the
//! ray. There is no stochastic fading term in the ground truth, so every
//! value computed here is reproducible; measurement noise enters the system
//! only through the ranging model in [`crate::localization`].
//!
//! All operations are pure functions of their inputs and a [`WorldModel`]
//! is immutable after construction, so everything here is safe to call
//! concurrently.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Free-space reference distance of the log-distance model, meters.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

/// Oxygen absorption applied to 60 GHz-class links: 20 dB/km.
pub const OXYGEN_ABSORPTION_DB_PER_M: f64 = 0.02;

/// Carrier frequency above which the oxygen absorption term applies, MHz.
pub const OXYGEN_ABSORPTION_MIN_FREQ_MHZ: f64 = 57_000.0;

/// Default flight ceiling, meters (the 400 ft small-UAS limit).
pub const DEFAULT_ALTITUDE_CEILING_M: f64 = 122.0;

/// Default ground discretization, meters.
pub const DEFAULT_GRID_RESOLUTION_M: f64 = 10.0;

/// Angular slack when testing cone membership, degrees. Keeps targets built
/// to sit exactly on the cone boundary inside it despite rounding.
const CONE_EDGE_TOLERANCE_DEG: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("transmitter and receiver positions coincide")]
    CoincidentEndpoints,
    #[error("invalid position: {0}")]
    InvalidPosition(String),
    #[error("invalid world model: {0}")]
    InvalidModel(String),
}

/// A point in the simulation volume. `z` is meters above ground.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Point on the ground plane.
    pub fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(WorldError::InvalidPosition(format!(
                "non-finite coordinate in ({}, {}, {})",
                self.x, self.y, self.z
            )));
        }
        if self.z < 0.0 {
            return Err(WorldError::InvalidPosition(format!(
                "altitude {} is below ground",
                self.z
            )));
        }
        Ok(())
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position3D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Axis-aligned ground rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn diagonal(&self) -> f64 {
        (self.width() * self.width() + self.height() * self.height()).sqrt()
    }
}

/// A building/foliage block: axis-aligned box from the ground up, with a
/// fixed attenuation charged once per ray that crosses it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
    pub height_m: f64,
    pub attenuation_db: f64,
}

impl Obstacle {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.height_m <= 0.0 {
            return Err(WorldError::InvalidModel(format!(
                "obstacle height {} must be positive",
                self.height_m
            )));
        }
        if self.attenuation_db < 0.0 {
            return Err(WorldError::InvalidModel(format!(
                "obstacle attenuation {} must be non-negative",
                self.attenuation_db
            )));
        }
        if self.max_x <= self.min_x || self.max_y <= self.min_y {
            return Err(WorldError::InvalidModel(
                "obstacle footprint is empty".into(),
            ));
        }
        Ok(())
    }

    /// Slab test of the segment `a`→`b` against the box. Grazing contact
    /// counts as a crossing; an intersection is charged once per obstacle
    /// regardless of how many faces the segment passes through.
    pub fn intersects_segment(&self, a: &Position3D, b: &Position3D) -> bool {
        let lows = [self.min_x, self.min_y, 0.0];
        let highs = [self.max_x, self.max_y, self.height_m];
        let origin = [a.x, a.y, a.z];
        let dir = [b.x - a.x, b.y - a.y, b.z - a.z];
        let mut t_min = 0.0_f64;
        let mut t_max = 1.0_f64;
        for axis in 0..3 {
            if dir[axis].abs() < 1e-15 {
                if origin[axis] < lows[axis] || origin[axis] > highs[axis] {
                    return false;
                }
            } else {
                let mut t1 = (lows[axis] - origin[axis]) / dir[axis];
                let mut t2 = (highs[axis] - origin[axis]) / dir[axis];
                if t1 > t2 {
                    std::mem::swap(&mut t1, &mut t2);
                }
                t_min = t_min.max(t1);
                t_max = t_max.min(t2);
                if t_min > t_max {
                    return false;
                }
            }
        }
        true
    }
}

/// Sectored-cone antenna: full boresight gain inside the cone, a flat floor
/// outside. `tilt_deg` is measured from straight down, `yaw_deg` rotates the
/// tilted boresight around the vertical axis (0° = +x, counterclockwise).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    pub boresight_gain_dbi: f64,
    pub beamwidth_deg: f64,
    pub floor_gain_dbi: f64,
    pub yaw_deg: f64,
    pub tilt_deg: f64,
}

impl AntennaPattern {
    pub fn new(boresight_gain_dbi: f64, beamwidth_deg: f64, floor_gain_dbi: f64) -> Self {
        Self {
            boresight_gain_dbi,
            beamwidth_deg,
            floor_gain_dbi,
            yaw_deg: 0.0,
            tilt_deg: 0.0,
        }
    }

    /// Unit gain in every direction.
    pub fn isotropic() -> Self {
        Self {
            boresight_gain_dbi: 0.0,
            beamwidth_deg: 360.0,
            floor_gain_dbi: 0.0,
            yaw_deg: 0.0,
            tilt_deg: 0.0,
        }
    }

    pub fn with_orientation(mut self, yaw_deg: f64, tilt_deg: f64) -> Self {
        self.yaw_deg = yaw_deg;
        self.tilt_deg = tilt_deg;
        self
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.beamwidth_deg > 0.0 && self.beamwidth_deg <= 360.0) {
            return Err(WorldError::InvalidModel(format!(
                "beamwidth {} outside (0, 360]",
                self.beamwidth_deg
            )));
        }
        if self.boresight_gain_dbi < self.floor_gain_dbi {
            return Err(WorldError::InvalidModel(format!(
                "boresight gain {} below floor gain {}",
                self.boresight_gain_dbi, self.floor_gain_dbi
            )));
        }
        Ok(())
    }

    /// Boresight unit vector for the current yaw/tilt.
    pub fn boresight(&self) -> [f64; 3] {
        let tilt = self.tilt_deg.to_radians();
        let yaw = self.yaw_deg.to_radians();
        [
            tilt.sin() * yaw.cos(),
            tilt.sin() * yaw.sin(),
            -tilt.cos(),
        ]
    }

    /// Angle in degrees between the boresight and the direction `from`→`to`.
    pub fn off_axis_deg(&self, from: &Position3D, to: &Position3D) -> Result<f64, WorldError> {
        let v = [to.x - from.x, to.y - from.y, to.z - from.z];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm == 0.0 {
            return Err(WorldError::CoincidentEndpoints);
        }
        let b = self.boresight();
        let dot = (v[0] * b[0] + v[1] * b[1] + v[2] * b[2]) / norm;
        Ok(dot.clamp(-1.0, 1.0).acos().to_degrees())
    }

    /// True when `to` falls inside the cone (boundary inclusive).
    pub fn in_cone(&self, from: &Position3D, to: &Position3D) -> Result<bool, WorldError> {
        Ok(self.off_axis_deg(from, to)? <= self.beamwidth_deg / 2.0 + CONE_EDGE_TOLERANCE_DEG)
    }
}

/// Gain of `pattern` (mounted at `from`) toward `to`.
pub fn antenna_gain(
    pattern: &AntennaPattern,
    from: &Position3D,
    to: &Position3D,
) -> Result<f64, WorldError> {
    if pattern.in_cone(from, to)? {
        Ok(pattern.boresight_gain_dbi)
    } else {
        Ok(pattern.floor_gain_dbi)
    }
}

/// SNR → spectral-efficiency mapping with a modulation cap and a
/// demodulation floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    /// Upper bound on bits/s/Hz regardless of SNR.
    pub spectral_efficiency_cap: f64,
    /// SNR below which the link carries nothing, dB.
    pub demod_floor_db: f64,
}

impl Default for RateModel {
    fn default() -> Self {
        Self {
            spectral_efficiency_cap: 7.4,
            demod_floor_db: -6.0,
        }
    }
}

impl RateModel {
    pub fn rate_bps(&self, snr_db: f64, bandwidth_hz: f64) -> f64 {
        if snr_db < self.demod_floor_db {
            return 0.0;
        }
        let linear = 10.0_f64.powf(snr_db / 10.0);
        let efficiency = (1.0 + linear).log2().min(self.spectral_efficiency_cap);
        bandwidth_hz * efficiency
    }
}

/// Shannon-style rate with the default cap and floor.
pub fn snr_to_rate(snr_db: f64, bandwidth_hz: f64) -> f64 {
    RateModel::default().rate_bps(snr_db, bandwidth_hz)
}

/// One cell of the discretized ground plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub ix: u32,
    pub iy: u32,
}

/// Terrain extent, obstacle set and radio constants: the ground truth every
/// other module computes against.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorldModel {
    pub extent: Rect,
    pub ground_grid_resolution_m: f64,
    pub obstacles: Vec<Obstacle>,
    pub access_freq_mhz: f64,
    pub backhaul_freq_mhz: f64,
    pub altitude_ceiling_m: f64,
    pub path_loss_exponent: f64,
    pub reference_distance_m: f64,
    /// Receiver noise floor used on access links, dBm.
    pub noise_floor_dbm: f64,
    pub rate_model: RateModel,
}

impl WorldModel {
    /// Obstacle-free world over `extent` with the default radio constants.
    pub fn open(extent: Rect) -> Self {
        Self {
            extent,
            ground_grid_resolution_m: DEFAULT_GRID_RESOLUTION_M,
            obstacles: Vec::new(),
            access_freq_mhz: 2600.0,
            backhaul_freq_mhz: 5800.0,
            altitude_ceiling_m: DEFAULT_ALTITUDE_CEILING_M,
            path_loss_exponent: 2.0,
            reference_distance_m: REFERENCE_DISTANCE_M,
            noise_floor_dbm: -94.0,
            rate_model: RateModel::default(),
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.extent.width() > 0.0 && self.extent.height() > 0.0) {
            return Err(WorldError::InvalidModel("empty extent".into()));
        }
        if self.ground_grid_resolution_m <= 0.0 {
            return Err(WorldError::InvalidModel("grid resolution must be positive".into()));
        }
        if self.path_loss_exponent < 2.0 {
            return Err(WorldError::InvalidModel(format!(
                "path-loss exponent {} below free-space value 2",
                self.path_loss_exponent
            )));
        }
        if self.reference_distance_m <= 0.0 {
            return Err(WorldError::InvalidModel("reference distance must be positive".into()));
        }
        if self.access_freq_mhz <= 0.0 || self.backhaul_freq_mhz <= 0.0 {
            return Err(WorldError::InvalidModel("carrier frequencies must be positive".into()));
        }
        if self.altitude_ceiling_m <= 0.0 {
            return Err(WorldError::InvalidModel("altitude ceiling must be positive".into()));
        }
        let (nx, ny) = self.grid_dims();
        if (nx as u64) * (ny as u64) > 4_000_000 {
            return Err(WorldError::InvalidModel(format!(
                "ground grid {}x{} too large",
                nx, ny
            )));
        }
        for obstacle in &self.obstacles {
            obstacle.validate()?;
        }
        Ok(())
    }

    pub fn grid_dims(&self) -> (u32, u32) {
        let nx = (self.extent.width() / self.ground_grid_resolution_m).ceil().max(1.0);
        let ny = (self.extent.height() / self.ground_grid_resolution_m).ceil().max(1.0);
        (nx as u32, ny as u32)
    }

    pub fn cell_center(&self, cell: GridCell) -> Position3D {
        Position3D::ground(
            self.extent.min_x + (cell.ix as f64 + 0.5) * self.ground_grid_resolution_m,
            self.extent.min_y + (cell.iy as f64 + 0.5) * self.ground_grid_resolution_m,
        )
    }

    /// Cell whose center is nearest to `(x, y)`, clamped into the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> GridCell {
        let (nx, ny) = self.grid_dims();
        let ix = ((x - self.extent.min_x) / self.ground_grid_resolution_m).floor();
        let iy = ((y - self.extent.min_y) / self.ground_grid_resolution_m).floor();
        GridCell {
            ix: (ix.max(0.0) as u32).min(nx - 1),
            iy: (iy.max(0.0) as u32).min(ny - 1),
        }
    }

    /// Row-major iterator over all ground cells.
    pub fn cells(&self) -> impl Iterator<Item = GridCell> {
        let (nx, ny) = self.grid_dims();
        (0..ny).flat_map(move |iy| (0..nx).map(move |ix| GridCell { ix, iy }))
    }

    /// Free-space loss at the reference distance for `freq_mhz`.
    pub fn reference_loss_db(&self, freq_mhz: f64) -> f64 {
        // Friis in engineering units: 32.44 + 20 log10(f_MHz) + 20 log10(d_km).
        32.44 + 20.0 * freq_mhz.log10() + 20.0 * (self.reference_distance_m / 1000.0).log10()
    }
}

/// Log-distance path loss plus per-obstacle attenuation along `tx`→`rx`.
pub fn path_loss(
    tx: &Position3D,
    rx: &Position3D,
    freq_mhz: f64,
    world: &WorldModel,
) -> Result<f64, WorldError> {
    if freq_mhz <= 0.0 {
        return Err(WorldError::InvalidModel(format!(
            "carrier frequency {} must be positive",
            freq_mhz
        )));
    }
    let d = tx.distance(rx);
    if d == 0.0 {
        return Err(WorldError::CoincidentEndpoints);
    }
    let mut loss = world.reference_loss_db(freq_mhz)
        + 10.0 * world.path_loss_exponent * (d / world.reference_distance_m).log10();
    for obstacle in &world.obstacles {
        if obstacle.intersects_segment(tx, rx) {
            loss += obstacle.attenuation_db;
        }
    }
    Ok(loss)
}

/// Full budget for one link, dB/dBm throughout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub path_loss_db: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    /// Oxygen absorption on 60 GHz-class links; zero below 57 GHz.
    pub extra_absorption_db: f64,
    pub noise_floor_dbm: f64,
    pub snr_db: f64,
}

impl LinkBudget {
    /// Residual of the budget identity; exactly zero for budgets produced by
    /// [`link_snr`].
    pub fn identity_residual_db(&self) -> f64 {
        self.snr_db
            - (self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi
                - self.path_loss_db
                - self.extra_absorption_db
                - self.noise_floor_dbm)
    }
}

/// Compose path loss, both antenna gains and the band-dependent absorption
/// term into a link budget.
#[allow(clippy::too_many_arguments)]
pub fn link_snr(
    tx_power_dbm: f64,
    tx_pattern: &AntennaPattern,
    tx: &Position3D,
    rx_pattern: &AntennaPattern,
    rx: &Position3D,
    freq_mhz: f64,
    noise_floor_dbm: f64,
    world: &WorldModel,
) -> Result<LinkBudget, WorldError> {
    let path_loss_db = path_loss(tx, rx, freq_mhz, world)?;
    let tx_gain_dbi = antenna_gain(tx_pattern, tx, rx)?;
    let rx_gain_dbi = antenna_gain(rx_pattern, rx, tx)?;
    let extra_absorption_db = if freq_mhz >= OXYGEN_ABSORPTION_MIN_FREQ_MHZ {
        OXYGEN_ABSORPTION_DB_PER_M * tx.distance(rx)
    } else {
        0.0
    };
    let snr_db = tx_power_dbm + tx_gain_dbi + rx_gain_dbi
        - path_loss_db
        - extra_absorption_db
        - noise_floor_dbm;
    Ok(LinkBudget {
        tx_power_dbm,
        path_loss_db,
        tx_gain_dbi,
        rx_gain_dbi,
        extra_absorption_db,
        noise_floor_dbm,
        snr_db,
    })
}

/// Ground cells that sit inside the antenna cone *and* clear `min_snr_db`
/// from `uav`. The receiver is modeled as isotropic.
pub fn coverage_footprint(
    uav: &Position3D,
    pattern: &AntennaPattern,
    world: &WorldModel,
    min_snr_db: f64,
    tx_power_dbm: f64,
) -> Result<std::collections::BTreeSet<GridCell>, WorldError> {
    if uav.z <= 0.0 {
        return Err(WorldError::InvalidPosition(format!(
            "UAV altitude {} must be positive",
            uav.z
        )));
    }
    let rx = AntennaPattern::isotropic();
    let mut cells = std::collections::BTreeSet::new();
    for cell in world.cells() {
        let center = self::WorldModel::cell_center(world, cell);
        if !pattern.in_cone(uav, &center)? {
            continue;
        }
        let budget = link_snr(
            tx_power_dbm,
            pattern,
            uav,
            &rx,
            &center,
            world.access_freq_mhz,
            world.noise_floor_dbm,
            world,
        )?;
        if budget.snr_db >= min_snr_db {
            cells.insert(cell);
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn test_world() -> WorldModel {
        WorldModel::open(Rect::new(0.0, 0.0, 1000.0, 1000.0))
    }

    #[test]
    fn path_loss_at_reference_distance_is_reference_loss() {
        let world = test_world();
        for freq in [700.0, 2600.0, 5800.0, 60_000.0] {
            let tx = Position3D::new(100.0, 100.0, 1.0);
            let rx = Position3D::ground(100.0, 100.0);
            let pl = path_loss(&tx, &rx, freq, &world).unwrap();
            assert_abs_diff_eq!(pl, world.reference_loss_db(freq), epsilon = 1e-12);
        }
    }

    #[test]
    fn path_loss_matches_friis_at_one_kilometer() {
        let world = test_world();
        let tx = Position3D::new(0.0, 0.0, 0.0);
        let rx = Position3D::new(1000.0, 0.0, 0.0);
        let pl = path_loss(&tx, &rx, 2600.0, &world).unwrap();
        // Independent evaluation of the free-space formula, d in km.
        let friis = 32.44 + 20.0 * 2600.0_f64.log10() + 20.0 * 1.0_f64.log10();
        assert_abs_diff_eq!(pl, friis, epsilon = 1e-9);
        assert_abs_diff_eq!(pl, 100.7395, epsilon = 1e-3);
    }

    #[test]
    fn obstacle_on_ray_adds_its_attenuation_once() {
        let mut world = test_world();
        let tx = Position3D::new(0.0, 0.0, 0.0);
        let rx = Position3D::new(1000.0, 0.0, 0.0);
        let clear = path_loss(&tx, &rx, 2600.0, &world).unwrap();
        let obstacle = Obstacle {
            min_x: 400.0,
            min_y: -10.0,
            max_x: 420.0,
            max_y: 10.0,
            height_m: 30.0,
            attenuation_db: 15.0,
        };
        assert_eq!(
            crate::oracle::segment_crossings_sampled(&tx, &rx, &[obstacle]),
            vec![true]
        );
        world.obstacles.push(obstacle);
        let blocked = path_loss(&tx, &rx, 2600.0, &world).unwrap();
        assert_abs_diff_eq!(blocked, clear + 15.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_endpoints_are_rejected() {
        let world = test_world();
        let p = Position3D::new(10.0, 10.0, 10.0);
        assert!(matches!(
            path_loss(&p, &p, 2600.0, &world),
            Err(WorldError::CoincidentEndpoints)
        ));
        let pattern = AntennaPattern::new(10.0, 90.0, -10.0);
        assert!(matches!(
            antenna_gain(&pattern, &p, &p),
            Err(WorldError::CoincidentEndpoints)
        ));
    }

    #[test]
    fn antenna_gain_straight_down() {
        let pattern = AntennaPattern::new(12.0, 90.0, -8.0);
        let uav = Position3D::new(50.0, 50.0, 100.0);
        let below = Position3D::ground(50.0, 50.0);
        assert_eq!(antenna_gain(&pattern, &uav, &below).unwrap(), 12.0);
    }

    #[test]
    fn antenna_gain_boundary_is_inclusive() {
        let pattern = AntennaPattern::new(12.0, 90.0, -8.0);
        let uav = Position3D::new(0.0, 0.0, 100.0);
        // Exactly 45 degrees off the straight-down boresight.
        let edge = Position3D::ground(100.0, 0.0);
        assert_eq!(antenna_gain(&pattern, &uav, &edge).unwrap(), 12.0);
    }

    #[test]
    fn antenna_gain_outside_cone_is_floor() {
        let pattern = AntennaPattern::new(12.0, 90.0, -8.0);
        let uav = Position3D::new(0.0, 0.0, 100.0);
        // tan(60°) ≈ 1.732 → 60 degrees off boresight.
        let target = Position3D::ground(100.0 * 60f64.to_radians().tan(), 0.0);
        assert_eq!(antenna_gain(&pattern, &uav, &target).unwrap(), -8.0);
    }

    #[test]
    fn antenna_gain_respects_yaw_and_tilt() {
        // Tilted 30° toward +x: a target far out along +x at the matching
        // depression angle is in-cone, the mirror target along -x is not.
        let pattern = AntennaPattern::new(10.0, 20.0, -5.0).with_orientation(0.0, 30.0);
        let uav = Position3D::new(0.0, 0.0, 100.0);
        let along = Position3D::ground(100.0 * 30f64.to_radians().tan(), 0.0);
        let mirror = Position3D::ground(-100.0 * 30f64.to_radians().tan(), 0.0);
        assert_eq!(antenna_gain(&pattern, &uav, &along).unwrap(), 10.0);
        assert_eq!(antenna_gain(&pattern, &uav, &mirror).unwrap(), -5.0);

        let yawed = pattern.with_orientation(180.0, 30.0);
        assert_eq!(antenna_gain(&yawed, &uav, &mirror).unwrap(), 10.0);
    }

    #[test]
    fn sixty_ghz_link_pays_twenty_db_per_km() {
        let world = test_world();
        let iso = AntennaPattern::isotropic();
        let tx = Position3D::new(0.0, 0.0, 100.0);
        let rx = Position3D::new(1000.0, 0.0, 100.0);
        let budget = link_snr(20.0, &iso, &tx, &iso, &rx, 60_000.0, -74.0, &world).unwrap();
        assert_eq!(budget.extra_absorption_db, 20.0);
        assert!(budget.identity_residual_db().abs() < 1e-9);
    }

    #[test]
    fn array_gain_offsets_absorption() {
        let world = test_world();
        let iso = AntennaPattern::isotropic();
        let array = AntennaPattern::new(30.0, 360.0, 30.0);
        let tx = Position3D::new(0.0, 0.0, 100.0);
        let rx = Position3D::new(1000.0, 0.0, 100.0);
        let plain = link_snr(20.0, &iso, &tx, &iso, &rx, 60_000.0, -74.0, &world).unwrap();
        let gained = link_snr(20.0, &array, &tx, &array, &rx, 60_000.0, -74.0, &world).unwrap();
        assert_abs_diff_eq!(gained.snr_db - plain.snr_db, 60.0, epsilon = 1e-9);
        // Net effect of the arrays vs an absorption-free isotropic link.
        assert_abs_diff_eq!(
            gained.snr_db - (plain.snr_db + plain.extra_absorption_db),
            40.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn sub6_link_has_no_absorption_term() {
        let world = test_world();
        let iso = AntennaPattern::isotropic();
        let tx = Position3D::new(0.0, 0.0, 100.0);
        let rx = Position3D::new(1000.0, 0.0, 100.0);
        let budget = link_snr(20.0, &iso, &tx, &iso, &rx, 5800.0, -94.0, &world).unwrap();
        assert_eq!(budget.extra_absorption_db, 0.0);
    }

    #[test]
    fn rate_at_zero_db_equals_bandwidth() {
        assert_abs_diff_eq!(snr_to_rate(0.0, 10e6), 10e6, epsilon = 1e-3);
    }

    #[test]
    fn rate_below_floor_is_zero() {
        assert_eq!(snr_to_rate(-20.0, 10e6), 0.0);
        assert_eq!(snr_to_rate(-6.000001, 10e6), 0.0);
    }

    #[test]
    fn rate_is_capped_at_spectral_efficiency_limit() {
        // log2(1 + 1000) ≈ 9.97 > 7.4, so the cap binds.
        assert_abs_diff_eq!(snr_to_rate(30.0, 1.0), 7.4, epsilon = 1e-12);
    }

    #[test]
    fn footprint_is_the_cone_disk_when_power_is_generous() {
        let world = test_world();
        let pattern = AntennaPattern::new(10.0, 90.0, -10.0);
        let uav = Position3D::new(505.0, 505.0, 100.0);
        let footprint = coverage_footprint(&uav, &pattern, &world, -6.0, 46.0).unwrap();
        let expected: std::collections::BTreeSet<GridCell> = world
            .cells()
            .filter(|&c| world.cell_center(c).horizontal_distance(&uav) <= 100.0)
            .collect();
        assert_eq!(footprint, expected);

        let lower = Position3D::new(505.0, 505.0, 50.0);
        let smaller = coverage_footprint(&lower, &pattern, &world, -6.0, 46.0).unwrap();
        let expected_small: std::collections::BTreeSet<GridCell> = world
            .cells()
            .filter(|&c| world.cell_center(c).horizontal_distance(&lower) <= 50.0)
            .collect();
        assert_eq!(smaller, expected_small);
        assert!(smaller.is_subset(&footprint));
        assert!(smaller.len() < footprint.len());
    }

    #[test]
    fn footprint_matches_per_cell_link_oracle_with_obstacle() {
        let mut world = test_world();
        world.obstacles.push(Obstacle {
            min_x: 540.0,
            min_y: 495.0,
            max_x: 560.0,
            max_y: 515.0,
            height_m: 80.0,
            attenuation_db: 60.0,
        });
        let pattern = AntennaPattern::new(10.0, 90.0, -10.0);
        let uav = Position3D::new(505.0, 505.0, 100.0);
        let min_snr = 5.0;
        let tx_power = 30.0;
        let footprint = coverage_footprint(&uav, &pattern, &world, min_snr, tx_power).unwrap();

        // The shadowed cell is out while its lateral neighbors stay in.
        let shadowed = world.cell_at(575.0, 505.0);
        let neighbor = world.cell_at(575.0, 535.0);
        assert!(!footprint.contains(&shadowed));
        assert!(footprint.contains(&neighbor));

        // Per-cell recheck straight from link_snr.
        let rx = AntennaPattern::isotropic();
        for cell in world.cells() {
            let center = world.cell_center(cell);
            let in_cone = pattern.in_cone(&uav, &center).unwrap();
            let snr = link_snr(
                tx_power,
                &pattern,
                &uav,
                &rx,
                &center,
                world.access_freq_mhz,
                world.noise_floor_dbm,
                &world,
            )
            .unwrap()
            .snr_db;
            assert_eq!(
                footprint.contains(&cell),
                in_cone && snr >= min_snr,
                "cell {:?} disagrees with oracle",
                cell
            );
        }
    }

    #[test]
    fn footprint_area_non_decreasing_in_altitude() {
        let world = test_world();
        let pattern = AntennaPattern::new(10.0, 90.0, -10.0);
        let mut last = 0usize;
        for z in [30.0, 50.0, 70.0, 90.0, 110.0] {
            let uav = Position3D::new(505.0, 505.0, z);
            let count = coverage_footprint(&uav, &pattern, &world, -6.0, 46.0)
                .unwrap()
                .len();
            assert!(count >= last, "footprint shrank at z={}", z);
            last = count;
        }
    }

    proptest! {
        #[test]
        fn path_loss_strictly_increases_with_distance(
            d1 in 1.0f64..2000.0,
            extra in 1.0f64..2000.0,
            freq in 500.0f64..70_000.0,
        ) {
            let world = WorldModel::open(Rect::new(-5000.0, -5000.0, 5000.0, 5000.0));
            let tx = Position3D::new(0.0, 0.0, 50.0);
            let near = Position3D::new(d1, 0.0, 50.0);
            let far = Position3D::new(d1 + extra, 0.0, 50.0);
            let pl_near = path_loss(&tx, &near, freq, &world).unwrap();
            let pl_far = path_loss(&tx, &far, freq, &world).unwrap();
            prop_assert!(pl_far > pl_near);
        }

        #[test]
        fn obstacles_never_reduce_path_loss(
            rx_x in 100.0f64..900.0,
            rx_y in 100.0f64..900.0,
            ox in 0.0f64..900.0,
            oy in 0.0f64..900.0,
            h in 1.0f64..150.0,
            att in 0.0f64..40.0,
        ) {
            let mut world = test_world();
            let tx = Position3D::new(0.0, 0.0, 80.0);
            let rx = Position3D::ground(rx_x, rx_y);
            let clear = path_loss(&tx, &rx, 2600.0, &world).unwrap();
            world.obstacles.push(Obstacle {
                min_x: ox, min_y: oy, max_x: ox + 50.0, max_y: oy + 50.0,
                height_m: h, attenuation_db: att,
            });
            let with = path_loss(&tx, &rx, 2600.0, &world).unwrap();
            prop_assert!(with >= clear);
        }

        #[test]
        fn link_budget_identity_is_exact(
            power in -10.0f64..40.0,
            dist in 1.0f64..3000.0,
            freq in 500.0f64..70_000.0,
            noise in -110.0f64..-60.0,
        ) {
            let world = WorldModel::open(Rect::new(-5000.0, -5000.0, 5000.0, 5000.0));
            let iso = AntennaPattern::isotropic();
            let tx = Position3D::new(0.0, 0.0, 60.0);
            let rx = Position3D::new(dist, 0.0, 60.0);
            let budget = link_snr(power, &iso, &tx, &iso, &rx, freq, noise, &world).unwrap();
            prop_assert_eq!(budget.identity_residual_db(), 0.0);
        }

        #[test]
        fn rate_is_monotone_in_snr(a in -30.0f64..50.0, b in -30.0f64..50.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(snr_to_rate(lo, 10e6) <= snr_to_rate(hi, 10e6));
        }

        #[test]
        fn footprint_radius_tracks_cone_geometry(
            z in 30.0f64..120.0,
            half_bw in 20.0f64..60.0,
        ) {
            let world = test_world();
            let pattern = AntennaPattern::new(10.0, 2.0 * half_bw, -10.0);
            let uav = Position3D::new(505.0, 505.0, z);
            let footprint = coverage_footprint(&uav, &pattern, &world, -6.0, 60.0).unwrap();
            let radius = z * half_bw.to_radians().tan();
            let slack = world.ground_grid_resolution_m * std::f64::consts::SQRT_2;
            for cell in world.cells() {
                let d = world.cell_center(cell).horizontal_distance(&uav);
                if footprint.contains(&cell) {
                    prop_assert!(d <= radius + slack);
                } else {
                    prop_assert!(d >= radius - slack);
                }
            }
        }
    }
}
