//! World geometry: flat terrain, box buildings, ships and foliage, plus the
//! four seeded air-to-ground scenarios and UAV trajectories.
//!
//! Coordinates are metres. The terrain is centred on the origin and the
//! ground station stands at `(0, 0)`. Scenario objects are scattered inside a
//! 2 km x 1 km corridor that starts [`CORRIDOR_START_M`] in front of the
//! ground station and runs along +x, leaving a clear street of half-width
//! [`STREET_HALF_WIDTH_M`] over which the UAV flies.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{Prism, Rect, Vec3};
use crate::rng::XorShift64Star;
use crate::{SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};

pub const TERRAIN_SIZE_M: f64 = 10_000.0;
pub const CORRIDOR_START_M: f64 = 50.0;
pub const CORRIDOR_LENGTH_M: f64 = 2_000.0;
pub const CORRIDOR_HALF_WIDTH_M: f64 = 500.0;
pub const STREET_HALF_WIDTH_M: f64 = 20.0;
/// Minimum gap between any two generated footprints.
pub const MIN_SEPARATION_M: f64 = 2.0;
const PLACEMENT_RETRIES: usize = 10_000;

pub const MIN_MODEL_FREQUENCY_HZ: f64 = 10e9;
pub const MAX_MODEL_FREQUENCY_HZ: f64 = 100e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("frequency {0} Hz outside the material model range [10 GHz, 100 GHz]")]
    FrequencyOutOfRange(f64),
    #[error("material {0} has no permittivity model (attenuation only)")]
    UnsupportedMaterial(MaterialKind),
    #[error("scene generation failed for {kind} seed {seed}: could not place {object} after {retries} attempts")]
    Placement {
        kind: ScenarioKind,
        seed: u64,
        object: String,
        retries: usize,
    },
    #[error("invalid object: {0}")]
    InvalidObject(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("scene text line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaterialKind {
    Concrete,
    DryGround,
    SeaWater,
    PerfectConductor,
    Foliage,
}

impl MaterialKind {
    pub fn name(self) -> &'static str {
        match self {
            MaterialKind::Concrete => "concrete",
            MaterialKind::DryGround => "dry_ground",
            MaterialKind::SeaWater => "sea_water",
            MaterialKind::PerfectConductor => "pec",
            MaterialKind::Foliage => "foliage",
        }
    }
}

impl fmt::Display for MaterialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaterialKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "concrete" => MaterialKind::Concrete,
            "dry_ground" => MaterialKind::DryGround,
            "sea_water" => MaterialKind::SeaWater,
            "pec" => MaterialKind::PerfectConductor,
            "foliage" => MaterialKind::Foliage,
            other => return Err(format!("unknown material `{other}`")),
        })
    }
}

/// Complex relative permittivity `eps' - j eps''`, or a perfect conductor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Permittivity {
    Dielectric(Complex64),
    PerfectConductor,
}

impl Permittivity {
    /// Loss term `eps''`; infinite for a perfect conductor.
    pub fn loss(&self) -> f64 {
        match self {
            Permittivity::Dielectric(eta) => -eta.im,
            Permittivity::PerfectConductor => f64::INFINITY,
        }
    }
}

/// `sigma / (2 pi f eps0)`: conductivity expressed as the imaginary permittivity part.
fn conductivity_term(sigma: f64, f_c: f64) -> f64 {
    sigma / (2.0 * std::f64::consts::PI * f_c * VACUUM_PERMITTIVITY)
}

/// Relative permittivity of a material at carrier `f_c` (Hz).
///
/// * concrete: `eps' = 5.31`, `sigma = 0.0326 f_GHz^0.8095` S/m;
/// * medium dry ground: `eps' = 15`, `sigma = 0.035` S/m, flat over the band;
/// * sea water: double-Debye model at 20 degC and salinity 35 g/kg
///   (see [`sea_water_permittivity`]);
/// * ship hulls: perfect conductor.
pub fn material_permittivity(kind: MaterialKind, f_c: f64) -> Result<Permittivity, SceneError> {
    if !(MIN_MODEL_FREQUENCY_HZ..=MAX_MODEL_FREQUENCY_HZ).contains(&f_c) {
        return Err(SceneError::FrequencyOutOfRange(f_c));
    }
    let f_ghz = f_c / 1e9;
    match kind {
        MaterialKind::Concrete => {
            let sigma = 0.0326 * f_ghz.powf(0.8095);
            Ok(Permittivity::Dielectric(Complex64::new(
                5.31,
                -conductivity_term(sigma, f_c),
            )))
        }
        MaterialKind::DryGround => Ok(Permittivity::Dielectric(Complex64::new(
            15.0,
            -conductivity_term(0.035, f_c),
        ))),
        MaterialKind::SeaWater => Ok(Permittivity::Dielectric(sea_water_permittivity(
            f_c, 20.0, 35.0,
        ))),
        MaterialKind::PerfectConductor => Ok(Permittivity::PerfectConductor),
        MaterialKind::Foliage => Err(SceneError::UnsupportedMaterial(kind)),
    }
}

/// Double-Debye permittivity of saline water with ionic conductivity
/// (Meissner-Wentz coefficients, as tabulated for ITU-R P.527).
///
/// `temp_c` in degC, `salinity` in g/kg. Returns `eps' - j eps''`.
pub fn sea_water_permittivity(f_c: f64, temp_c: f64, salinity: f64) -> Complex64 {
    let t = temp_c;
    let s = salinity;
    let f_ghz = f_c / 1e9;

    // Pure water.
    let eps_s0 = (3.70886e4 - 8.2168e1 * t) / (4.21854e2 + t);
    let eps_10 = 5.7230 + 2.2379e-2 * t - 7.1237e-4 * t * t;
    let nu_10 = (45.0 + t) / (5.0478 - 7.0315e-2 * t + 6.0059e-4 * t * t);
    let eps_inf0 = 3.6143 + 2.8841e-2 * t;
    let nu_20 = (45.0 + t) / (1.3652e-1 + 1.4825e-3 * t + 2.4166e-4 * t * t);

    // Salinity corrections.
    let eps_s = eps_s0 * (-3.56417e-3 * s + 4.74868e-6 * s * s + 1.15574e-5 * t * s).exp();
    let nu_1 = nu_10 * (1.0 + s * (2.39357e-3 - 3.13530e-5 * t + 2.52477e-7 * t * t));
    let eps_1 = eps_10 * (-6.28908e-3 * s + 1.76032e-4 * s * s - 9.22144e-5 * t * s).exp();
    let nu_2 = nu_20 * (1.0 + s * (-1.99723e-2 + 1.81176e-4 * t));
    let eps_inf = eps_inf0 * (1.0 + s * (-2.04265e-3 + 1.57883e-4 * t));

    // Ionic conductivity (S/m).
    let sigma35 = 2.903602 + 8.607e-2 * t + 4.738817e-4 * t * t - 2.991e-6 * t.powi(3)
        + 4.3047e-9 * t.powi(4);
    let r15 = s * (37.5109 + 5.45216 * s + 1.4409e-2 * s * s) / (1004.75 + 182.283 * s + s * s);
    let alpha0 = (6.9431 + 3.2841 * s - 9.9486e-2 * s * s) / (84.850 + 69.024 * s + s * s);
    let alpha1 = 49.843 - 0.2276 * s + 0.198e-2 * s * s;
    let sigma = sigma35 * r15 * (1.0 + alpha0 * (t - 15.0) / (alpha1 + t));

    let j = Complex64::i();
    let relax1 = (eps_s - eps_1) / (1.0 + j * (f_ghz / nu_1));
    let relax2 = (eps_1 - eps_inf) / (1.0 + j * (f_ghz / nu_2));
    relax1 + relax2 + eps_inf - j * conductivity_term(sigma, f_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    OverSea,
    Rural,
    Suburban,
    Urban,
    /// Flat dry ground with no objects; reference scene for the two-ray comparison.
    Bare,
}

impl ScenarioKind {
    pub const STANDARD: [ScenarioKind; 4] = [
        ScenarioKind::OverSea,
        ScenarioKind::Rural,
        ScenarioKind::Suburban,
        ScenarioKind::Urban,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::OverSea => "over_sea",
            ScenarioKind::Rural => "rural",
            ScenarioKind::Suburban => "suburban",
            ScenarioKind::Urban => "urban",
            ScenarioKind::Bare => "bare",
        }
    }

    /// Number of buildings.
    pub fn building_count(self) -> usize {
        match self {
            ScenarioKind::OverSea | ScenarioKind::Bare => 0,
            ScenarioKind::Rural => 10,
            ScenarioKind::Suburban => 20,
            ScenarioKind::Urban => 100,
        }
    }

    /// Closed building-height range in metres.
    pub fn height_range(self) -> Option<(f64, f64)> {
        match self {
            ScenarioKind::OverSea | ScenarioKind::Bare => None,
            ScenarioKind::Rural => Some((4.0, 8.0)),
            ScenarioKind::Suburban => Some((4.0, 30.0)),
            ScenarioKind::Urban => Some((70.0, 180.0)),
        }
    }

    fn footprint_side_range(self) -> (f64, f64) {
        match self {
            ScenarioKind::Urban => (10.0, 40.0),
            _ => (8.0, 20.0),
        }
    }

    pub fn foliage_count(self) -> usize {
        match self {
            ScenarioKind::Rural => 5,
            ScenarioKind::Suburban => 8,
            _ => 0,
        }
    }

    pub fn ground_material(self) -> MaterialKind {
        match self {
            ScenarioKind::OverSea => MaterialKind::SeaWater,
            _ => MaterialKind::DryGround,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "over_sea" => ScenarioKind::OverSea,
            "rural" => ScenarioKind::Rural,
            "suburban" => ScenarioKind::Suburban,
            "urban" => ScenarioKind::Urban,
            "bare" => ScenarioKind::Bare,
            other => return Err(format!("unknown scenario `{other}`")),
        })
    }
}

/// Opaque box on the ground. Ships use the same representation with a
/// perfectly conducting hull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Building {
    pub footprint: Rect,
    pub height: f64,
    pub material: MaterialKind,
}

impl Building {
    pub fn prism(&self) -> Prism {
        Prism {
            footprint: self.footprint,
            height: self.height,
        }
    }
}

/// Attenuating, non-reflecting block of vegetation from the ground up to `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoliageBlock {
    pub footprint: Rect,
    pub height: f64,
}

impl FoliageBlock {
    pub fn prism(&self) -> Prism {
        Prism {
            footprint: self.footprint,
            height: self.height,
        }
    }
}

/// Immutable world description queried by the tracer.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub extent: (f64, f64),
    pub ground: MaterialKind,
    pub buildings: Vec<Building>,
    pub ships: Vec<Building>,
    pub foliage: Vec<FoliageBlock>,
}

impl Scene {
    /// Empty flat scene on the default terrain.
    pub fn flat(ground: MaterialKind) -> Self {
        Self {
            kind: ScenarioKind::Bare,
            seed: 0,
            extent: (TERRAIN_SIZE_M, TERRAIN_SIZE_M),
            ground,
            buildings: Vec::new(),
            ships: Vec::new(),
            foliage: Vec::new(),
        }
    }

    pub fn bounds(&self) -> Rect {
        let (w, d) = self.extent;
        Rect::new(-w / 2.0, -d / 2.0, w / 2.0, d / 2.0)
    }

    /// Buildings followed by ships; indices into this sequence are obstacle ids.
    pub fn obstacles(&self) -> impl Iterator<Item = &Building> + '_ {
        self.buildings.iter().chain(self.ships.iter())
    }

    pub fn obstacle_count(&self) -> usize {
        self.buildings.len() + self.ships.len()
    }

    /// Human-readable name of obstacle `idx` (`building 3`, `ship 0`).
    pub fn obstacle_label(&self, idx: usize) -> String {
        if idx < self.buildings.len() {
            format!("building {idx}")
        } else {
            format!("ship {}", idx - self.buildings.len())
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bounds = self.bounds();
        let check = |label: String, fp: &Rect, h: f64| {
            if !(h > 0.0 && h.is_finite()) {
                return Err(SceneError::InvalidObject(format!(
                    "{label}: height {h} must be > 0"
                )));
            }
            if !(fp.area() > 0.0) {
                return Err(SceneError::InvalidObject(format!(
                    "{label}: degenerate footprint"
                )));
            }
            if !fp.inside(&bounds) {
                return Err(SceneError::InvalidObject(format!(
                    "{label}: outside terrain"
                )));
            }
            Ok(())
        };
        for (i, b) in self.obstacles().enumerate() {
            check(self.obstacle_label(i), &b.footprint, b.height)?;
            if b.material == MaterialKind::Foliage {
                return Err(SceneError::InvalidObject(format!(
                    "{}: foliage cannot be an opaque obstacle",
                    self.obstacle_label(i)
                )));
            }
        }
        for (i, f) in self.foliage.iter().enumerate() {
            check(format!("foliage {i}"), &f.footprint, f.height)?;
        }
        Ok(())
    }

    /// Line-oriented text form:
    ///
    /// ```text
    /// scene v1 <kind> <seed>
    /// building <x0> <y0> <x1> <y1> <h> <material>
    /// foliage <x0> <y0> <x1> <y1> <h>
    /// ship <x0> <y0> <x1> <y1> <h> <material>
    /// ```
    ///
    /// Numbers use the shortest decimal form that round-trips exactly; every
    /// line ends in `\n`. The ground material and terrain extent follow from
    /// the kind.
    pub fn to_text(&self) -> String {
        let mut out = format!("scene v1 {} {}\n", self.kind, self.seed);
        for b in &self.buildings {
            let r = b.footprint;
            out.push_str(&format!(
                "building {} {} {} {} {} {}\n",
                r.x0, r.y0, r.x1, r.y1, b.height, b.material
            ));
        }
        for f in &self.foliage {
            let r = f.footprint;
            out.push_str(&format!(
                "foliage {} {} {} {} {}\n",
                r.x0, r.y0, r.x1, r.y1, f.height
            ));
        }
        for s in &self.ships {
            let r = s.footprint;
            out.push_str(&format!(
                "ship {} {} {} {} {} {}\n",
                r.x0, r.y0, r.x1, r.y1, s.height, s.material
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Scene, SceneError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, msg: String| SceneError::Parse {
            line: line + 1,
            msg,
        };
        let (_, header) = lines.next().ok_or_else(|| err(0, "empty input".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "scene" || fields[1] != "v1" {
            return Err(err(0, format!("bad header `{header}`")));
        }
        let kind: ScenarioKind = fields[2].parse().map_err(|e| err(0, e))?;
        let seed: u64 = fields[3]
            .parse()
            .map_err(|_| err(0, format!("bad seed `{}`", fields[3])))?;
        let mut scene = Scene {
            kind,
            seed,
            ground: kind.ground_material(),
            ..Scene::flat(kind.ground_material())
        };
        for (idx, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            let nums = |n: usize| -> Result<Vec<f64>, SceneError> {
                if f.len() < 1 + n {
                    return Err(err(idx, format!("expected {n} numbers after `{}`", f[0])));
                }
                f[1..=n]
                    .iter()
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| err(idx, format!("bad number `{s}`")))
                    })
                    .collect()
            };
            match f[0] {
                "building" | "ship" => {
                    let v = nums(5)?;
                    if f.len() != 7 {
                        return Err(err(idx, "expected 5 numbers and a material".into()));
                    }
                    let material: MaterialKind = f[6].parse().map_err(|e| err(idx, e))?;
                    let b = Building {
                        footprint: Rect::new(v[0], v[1], v[2], v[3]),
                        height: v[4],
                        material,
                    };
                    if f[0] == "building" {
                        scene.buildings.push(b);
                    } else {
                        scene.ships.push(b);
                    }
                }
                "foliage" => {
                    let v = nums(5)?;
                    if f.len() != 6 {
                        return Err(err(idx, "expected 5 numbers".into()));
                    }
                    scene.foliage.push(FoliageBlock {
                        footprint: Rect::new(v[0], v[1], v[2], v[3]),
                        height: v[4],
                    });
                }
                other => return Err(err(idx, format!("unknown object `{other}`"))),
            }
        }
        scene.validate()?;
        Ok(scene)
    }
}

/// Footprints are kept out of this band so the flight line stays clear.
fn street() -> Rect {
    Rect::new(
        CORRIDOR_START_M - 1.0,
        -STREET_HALF_WIDTH_M,
        CORRIDOR_START_M + CORRIDOR_LENGTH_M + 1.0,
        STREET_HALF_WIDTH_M,
    )
}

fn corridor() -> Rect {
    Rect::new(
        CORRIDOR_START_M,
        -CORRIDOR_HALF_WIDTH_M,
        CORRIDOR_START_M + CORRIDOR_LENGTH_M,
        CORRIDOR_HALF_WIDTH_M,
    )
}

struct Placer<'a> {
    rng: &'a mut XorShift64Star,
    taken: Vec<Rect>,
    kind: ScenarioKind,
    seed: u64,
}

impl Placer<'_> {
    /// Random rectangle of side lengths in `side_x` / `side_y` inside the
    /// corridor, clear of the street and of everything placed so far.
    fn place(
        &mut self,
        side_x: (f64, f64),
        side_y: (f64, f64),
        label: &str,
    ) -> Result<Rect, SceneError> {
        let area = corridor();
        let street = street();
        for _ in 0..PLACEMENT_RETRIES {
            let w = self.rng.uniform(side_x.0, side_x.1);
            let d = self.rng.uniform(side_y.0, side_y.1);
            let x0 = self.rng.uniform(area.x0, area.x1 - w);
            let y0 = self.rng.uniform(area.y0, area.y1 - d);
            let r = Rect::new(x0, y0, x0 + w, y0 + d);
            if r.overlaps(&street, 0.0) {
                continue;
            }
            if self.taken.iter().any(|t| t.overlaps(&r, MIN_SEPARATION_M)) {
                continue;
            }
            self.taken.push(r);
            return Ok(r);
        }
        Err(SceneError::Placement {
            kind: self.kind,
            seed: self.seed,
            object: label.to_string(),
            retries: PLACEMENT_RETRIES,
        })
    }
}

/// Builds one of the scenarios deterministically from `seed`.
///
/// Draw order is buildings (size, position, height), then foliage, then
/// ships, all from one [`XorShift64Star`] stream.
pub fn generate_scenario(kind: ScenarioKind, seed: u64) -> Result<Scene, SceneError> {
    let mut rng = XorShift64Star::new(seed);
    let mut scene = Scene {
        kind,
        seed,
        ground: kind.ground_material(),
        ..Scene::flat(kind.ground_material())
    };
    let mut placer = Placer {
        rng: &mut rng,
        taken: Vec::new(),
        kind,
        seed,
    };

    if let Some((h_lo, h_hi)) = kind.height_range() {
        let side = kind.footprint_side_range();
        for i in 0..kind.building_count() {
            let footprint = placer.place(side, side, &format!("building {i}"))?;
            let height = placer.rng.uniform(h_lo, h_hi);
            scene.buildings.push(Building {
                footprint,
                height,
                material: MaterialKind::Concrete,
            });
        }
    }

    for i in 0..kind.foliage_count() {
        let footprint = placer.place((5.0, 15.0), (5.0, 15.0), &format!("foliage {i}"))?;
        let height = placer.rng.uniform(4.0, 10.0);
        scene.foliage.push(FoliageBlock { footprint, height });
    }

    if kind == ScenarioKind::OverSea {
        // Two hulls, long axis along the flight line.
        for i in 0..2 {
            let footprint = placer.place((40.0, 80.0), (10.0, 15.0), &format!("ship {i}"))?;
            let height = placer.rng.uniform(10.0, 20.0);
            scene.ships.push(Building {
                footprint,
                height,
                material: MaterialKind::PerfectConductor,
            });
        }
    }

    scene.validate()?;
    Ok(scene)
}

/// Straight, level UAV flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    /// Ground-plane start position; the z component is ignored.
    pub start: Vec3,
    /// Horizontal unit vector.
    pub heading: Vec3,
    pub length: f64,
    pub height: f64,
    pub speed: f64,
    pub spacing: f64,
}

impl TrajectorySpec {
    /// Default flight: starts [`CORRIDOR_START_M`] from the ground station
    /// along +x, 2 km long, 15 m/s, 1 m spacing.
    pub fn default_at_height(height: f64) -> Self {
        Self {
            start: Vec3::new(CORRIDOR_START_M, 0.0, 0.0),
            heading: Vec3::new(1.0, 0.0, 0.0),
            length: CORRIDOR_LENGTH_M,
            height,
            speed: 15.0,
            spacing: 1.0,
        }
    }

    /// Spacing derived from flight speed and receiver sampling interval.
    pub fn with_time_step(mut self, dt: f64) -> Self {
        self.spacing = self.speed * dt;
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidTrajectory(m.to_string()));
        if !(self.length >= 0.0 && self.length.is_finite()) {
            return bad("length must be >= 0");
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return bad("spacing must be > 0");
        }
        if !(self.height >= 0.0 && self.height.is_finite()) {
            return bad("height must be >= 0");
        }
        if !(self.speed > 0.0) {
            return bad("speed must be > 0");
        }
        if self.heading.z != 0.0 || (self.heading.norm() - 1.0).abs() > 1e-9 {
            return bad("heading must be a horizontal unit vector");
        }
        if !self.start.is_finite() {
            return bad("start must be finite");
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        // Small slack so that e.g. 2000 / 0.1 does not lose the last point to rounding.
        (self.length / self.spacing + 1e-9).floor() as usize + 1
    }
}

/// Receiver positions along the flight, `spacing` apart, starting at `start`.
pub fn trajectory_samples(spec: &TrajectorySpec) -> Result<Vec<Vec3>, SceneError> {
    spec.validate()?;
    let base = Vec3::new(spec.start.x, spec.start.y, spec.height);
    Ok((0..spec.sample_count())
        .map(|i| base + spec.heading * (i as f64 * spec.spacing))
        .collect())
}

/// Free-space wavelength.
pub fn wavelength(f_c: f64) -> f64 {
    SPEED_OF_LIGHT / f_c
}
