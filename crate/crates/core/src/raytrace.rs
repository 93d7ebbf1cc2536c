//! Image-method multipath search between a ground transmitter and an airborne
//! receiver.
//!
//! Paths found: line of sight, specular reflections off the ground and the
//! vertical facades of buildings and ships up to a configurable order, and a
//! single knife-edge diffraction over the most obstructive rooftop whenever
//! the direct ray is blocked. Foliage is transparent but attenuates every
//! segment that crosses it.
//!
//! Geometry does not depend on the carrier, so the search
//! ([`Tracer::geometric_paths`]) is separated from gain evaluation
//! ([`evaluate_paths`]); a campaign traces each receiver position once and
//! evaluates it at every frequency.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{Axis, Prism, Vec3};
use crate::scene::{
    material_permittivity, wavelength, MaterialKind, Permittivity, Scene, SceneError,
};
use crate::textfmt::g6;
use crate::SPEED_OF_LIGHT;

/// Positions closer than this are treated as coincident.
const GEOM_EPS: f64 = 1e-9;
/// Segment overlap with an obstacle below this length (m) is a touch, not a block.
const OCCLUSION_EPS_M: f64 = 1e-6;
/// Phase of the knife-edge field deep in the shadow region.
const DIFFRACTION_PHASE: f64 = -PI / 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("degenerate geometry at {surface}: {detail}")]
    Geometry { surface: String, detail: String },
    #[error("invalid trace configuration: {0}")]
    Config(String),
    #[error("foliage depth {0} m exceeds the 400 m model limit")]
    FoliageDepth(f64),
    #[error(transparent)]
    Material(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InteractionKind {
    LineOfSight,
    GroundReflection,
    FacadeReflection,
    RooftopDiffraction,
    FoliagePenetration,
}

/// Vertical face of an obstacle, named by its outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    MinusX,
    PlusX,
    MinusY,
    PlusY,
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Face::MinusX => "-x",
            Face::PlusX => "+x",
            Face::MinusY => "-y",
            Face::PlusY => "+y",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceRef {
    Direct,
    Ground,
    /// Obstacle index as in [`Scene::obstacles`].
    Facade {
        obstacle: usize,
        face: Face,
    },
    Rooftop {
        obstacle: usize,
    },
    Foliage {
        block: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub surface: SurfaceRef,
    pub point: Vec3,
}

/// One multipath arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct PathComponent {
    /// Linear voltage gain relative to the 1 m free-space reference.
    pub amplitude: f64,
    /// Radians in `(-pi, pi]`.
    pub phase: f64,
    /// Seconds.
    pub delay: f64,
    pub interactions: Vec<Interaction>,
    pub frequency: f64,
}

impl PathComponent {
    pub fn phasor(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    pub fn gain_db(&self) -> f64 {
        20.0 * self.amplitude.log10()
    }

    pub fn is_line_of_sight(&self) -> bool {
        self.interactions
            .first()
            .is_some_and(|i| i.kind == InteractionKind::LineOfSight)
    }

    /// Interaction chain, e.g. `los`, `ground`, `facade-ground`, `diffraction+foliage`.
    pub fn chain(&self) -> String {
        chain_label(&self.interactions)
    }
}

fn chain_label(interactions: &[Interaction]) -> String {
    let mut parts = Vec::new();
    let mut foliage = false;
    for i in interactions {
        match i.kind {
            InteractionKind::LineOfSight => parts.push("los"),
            InteractionKind::GroundReflection => parts.push("ground"),
            InteractionKind::FacadeReflection => parts.push("facade"),
            InteractionKind::RooftopDiffraction => parts.push("diffraction"),
            InteractionKind::FoliagePenetration => foliage = true,
        }
    }
    let mut s = parts.join("-");
    if foliage {
        s.push_str("+foliage");
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Antenna {
    /// Vertical half-wave dipole (axis along z).
    HalfWaveDipole,
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    /// Highest number of specular bounces, 0..=3.
    pub max_order: u8,
    pub diffraction: bool,
    /// Paths weaker than the strongest by more than this are dropped (10..=60 dB).
    pub cut_db: f64,
    pub antenna: Antenna,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            max_order: 2,
            diffraction: true,
            cut_db: 30.0,
            antenna: Antenna::HalfWaveDipole,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.max_order > 3 {
            return Err(TraceError::Config(format!(
                "max reflection order {} outside 0..=3",
                self.max_order
            )));
        }
        if !(10.0..=60.0).contains(&self.cut_db) {
            return Err(TraceError::Config(format!(
                "dynamic-range cut {} dB outside [10, 60]",
                self.cut_db
            )));
        }
        Ok(())
    }
}

/// Polarization relative to the plane of a horizontal reflector.
///
/// A vertically polarized wave hitting a vertical wall has its electric field
/// parallel to the wall, which is the boundary condition of the horizontal
/// case; facade reflections therefore use [`Polarization::Horizontal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Vertical,
    Horizontal,
}

/// Fresnel reflection coefficient for complex relative permittivity `eta`
/// (`eps' - j eps''`) at grazing angle `grazing` (radians from the surface).
pub fn fresnel_reflection(eta: Permittivity, grazing: f64, pol: Polarization) -> Complex64 {
    let eta = match eta {
        Permittivity::PerfectConductor => {
            return match pol {
                Polarization::Vertical => Complex64::new(1.0, 0.0),
                Polarization::Horizontal => Complex64::new(-1.0, 0.0),
            }
        }
        Permittivity::Dielectric(eta) => eta,
    };
    let psi = grazing.clamp(0.0, PI / 2.0);
    let (s, c) = psi.sin_cos();
    let root = (eta - c * c).sqrt();
    match pol {
        Polarization::Vertical => (eta * s - root) / (eta * s + root),
        Polarization::Horizontal => (s - root) / (s + root),
    }
}

/// Single knife-edge loss in dB (ITU-R P.526 approximation).
pub fn knife_edge_loss(nu: f64) -> f64 {
    if nu <= -0.78 {
        return 0.0;
    }
    let x = nu - 0.1;
    (6.9 + 20.0 * ((x * x + 1.0).sqrt() + x).log10()).max(0.0)
}

/// Power gain of a vertical half-wave dipole at `theta` radians from its axis.
pub fn dipole_gain(theta: f64) -> f64 {
    let s = theta.sin();
    if s.abs() < 1e-12 {
        return 0.0;
    }
    let v = (PI / 2.0 * theta.cos()).cos() / s;
    1.64 * v * v
}

/// Weissberger foliage loss in dB for `depth` metres of vegetation.
pub fn foliage_loss(depth: f64, f_c: f64) -> Result<f64, TraceError> {
    if !(depth >= 0.0) || depth > 400.0 {
        return Err(TraceError::FoliageDepth(depth));
    }
    let f_ghz = f_c / 1e9;
    Ok(if depth == 0.0 {
        0.0
    } else if depth <= 14.0 {
        0.45 * f_ghz.powf(0.284) * depth
    } else {
        1.33 * f_ghz.powf(0.284) * depth.powf(0.588)
    })
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy)]
struct Plane {
    axis: Axis,
    coord: f64,
    /// +1 or -1: the side the surface faces.
    outward: f64,
    /// Facade extent: `(lo, hi)` along the other horizontal axis and height.
    extent: Option<(f64, f64, f64)>,
    material: MaterialKind,
    surface: SurfaceRef,
}

impl Plane {
    fn signed_distance(&self, p: Vec3) -> f64 {
        self.outward * (p.component(self.axis) - self.coord)
    }

    fn mirror(&self, p: Vec3) -> Vec3 {
        let mut q = p;
        let v = 2.0 * self.coord - p.component(self.axis);
        match self.axis {
            Axis::X => q.x = v,
            Axis::Y => q.y = v,
            Axis::Z => q.z = v,
        }
        q
    }

    fn normal(&self) -> Vec3 {
        match self.axis {
            Axis::X => Vec3::new(self.outward, 0.0, 0.0),
            Axis::Y => Vec3::new(0.0, self.outward, 0.0),
            Axis::Z => Vec3::new(0.0, 0.0, self.outward),
        }
    }

    /// Whether `p` (assumed on the plane) lies on the finite surface.
    fn contains(&self, p: Vec3, bounds: &crate::geometry::Rect) -> bool {
        match self.extent {
            None => bounds.contains(p.x, p.y),
            Some((lo, hi, h)) => {
                let along = match self.axis {
                    Axis::X => p.y,
                    _ => p.x,
                };
                along >= lo - GEOM_EPS
                    && along <= hi + GEOM_EPS
                    && p.z >= -GEOM_EPS
                    && p.z <= h + GEOM_EPS
            }
        }
    }

    /// Whether any point of this surface lies strictly in front of `other`.
    fn partly_in_front_of(&self, other: &Plane) -> bool {
        if other.extent.is_none() || self.extent.is_none() {
            // The ground faces up at every facade, and each facade rises above the ground.
            return true;
        }
        let (lo, hi, _) = self.extent.unwrap();
        if self.axis == other.axis {
            other.outward * (self.coord - other.coord) > GEOM_EPS
        } else {
            // Along `other.axis` this surface spans [lo, hi].
            other.outward * (hi - other.coord) > GEOM_EPS
                || other.outward * (lo - other.coord) > GEOM_EPS
        }
    }

    fn polarization(&self) -> Polarization {
        match self.axis {
            Axis::Z => Polarization::Vertical,
            _ => Polarization::Horizontal,
        }
    }

    fn describe(&self, scene: &Scene) -> String {
        match self.surface {
            SurfaceRef::Ground => "ground".into(),
            SurfaceRef::Facade { obstacle, face } => {
                format!("{} face {}", scene.obstacle_label(obstacle), face)
            }
            _ => "surface".into(),
        }
    }
}

const ROOT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct ImageNode {
    image: Vec3,
    plane: u32,
    parent: u32,
}

/// Bounce recorded on a geometric path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounce {
    pub material: MaterialKind,
    pub polarization: Polarization,
    pub grazing: f64,
}

/// Knife edge used by a diffracted path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnifeEdge {
    /// Height of the edge above the direct ray (m); positive when obstructing.
    pub clearance: f64,
    /// Distances from each terminal to the edge along the direct ray (m).
    pub d_tx: f64,
    pub d_rx: f64,
}

impl KnifeEdge {
    pub fn nu(&self, lambda: f64) -> f64 {
        self.clearance * (2.0 / lambda * (self.d_tx + self.d_rx) / (self.d_tx * self.d_rx)).sqrt()
    }
}

/// Carrier-independent description of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPath {
    /// Vertices from transmitter to receiver.
    pub vertices: Vec<Vec3>,
    pub interactions: Vec<Interaction>,
    pub bounces: Vec<Bounce>,
    pub edge: Option<KnifeEdge>,
    pub foliage_depth: f64,
}

impl GeometricPath {
    /// Total unfolded length in metres.
    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    pub fn departure(&self) -> Vec3 {
        (self.vertices[1] - self.vertices[0]).normalized()
    }

    /// Direction from the receiver back along the arriving ray.
    pub fn arrival(&self) -> Vec3 {
        let n = self.vertices.len();
        (self.vertices[n - 2] - self.vertices[n - 1]).normalized()
    }
}

/// Image tree and obstacle lists for one scene and transmitter position.
///
/// Build once and query many receiver positions; the tracer is immutable and
/// can be shared across threads.
#[derive(Debug, Clone)]
pub struct Tracer<'s> {
    scene: &'s Scene,
    tx: Vec3,
    cfg: TraceConfig,
    planes: Vec<Plane>,
    nodes: Vec<ImageNode>,
    obstacles: Vec<Prism>,
    foliage: Vec<Prism>,
}

impl<'s> Tracer<'s> {
    pub fn new(scene: &'s Scene, tx: Vec3, cfg: TraceConfig) -> Result<Self, TraceError> {
        cfg.validate()?;
        let obstacles: Vec<Prism> = scene.obstacles().map(|b| b.prism()).collect();
        let foliage: Vec<Prism> = scene.foliage.iter().map(|f| f.prism()).collect();
        let planes = build_planes(scene);
        let mut tracer = Tracer {
            scene,
            tx,
            cfg,
            planes,
            nodes: Vec::new(),
            obstacles,
            foliage,
        };
        tracer.check_terminal(tx, "transmitter")?;
        tracer.build_images();
        Ok(tracer)
    }

    pub fn tx(&self) -> Vec3 {
        self.tx
    }

    pub fn config(&self) -> &TraceConfig {
        &self.cfg
    }

    /// Number of image sources in the tree (excluding the transmitter).
    pub fn image_count(&self) -> usize {
        self.nodes.len()
    }

    fn check_terminal(&self, p: Vec3, role: &str) -> Result<(), TraceError> {
        let bounds = self.scene.bounds();
        if !p.is_finite() || !bounds.contains(p.x, p.y) {
            return Err(TraceError::Geometry {
                surface: "terrain".into(),
                detail: format!("{role} at {p:?} is outside the terrain"),
            });
        }
        if p.z <= GEOM_EPS {
            return Err(TraceError::Geometry {
                surface: "ground".into(),
                detail: format!("{role} at {p:?} is not above the ground"),
            });
        }
        for plane in self.planes.iter().filter(|pl| pl.extent.is_some()) {
            if plane.signed_distance(p).abs() <= GEOM_EPS && plane.contains(p, &bounds) {
                return Err(TraceError::Geometry {
                    surface: plane.describe(self.scene),
                    detail: format!("{role} at {p:?} lies on the facade plane"),
                });
            }
        }
        for (i, ob) in self.obstacles.iter().enumerate() {
            if ob.contains(p) {
                return Err(TraceError::Geometry {
                    surface: self.scene.obstacle_label(i),
                    detail: format!("{role} at {p:?} is inside the obstacle"),
                });
            }
        }
        Ok(())
    }

    fn build_images(&mut self) {
        let n = self.planes.len();
        // visible[a * n + b]: a reflection off `a` can continue to `b`.
        let mut visible = vec![false; n * n];
        for a in 0..n {
            for b in 0..n {
                visible[a * n + b] = a != b
                    && self.planes[b].partly_in_front_of(&self.planes[a])
                    && self.planes[a].partly_in_front_of(&self.planes[b]);
            }
        }
        let mut level: Vec<u32> = Vec::new();
        for order in 1..=self.cfg.max_order {
            let mut next = Vec::new();
            let sources: Vec<(Vec3, Option<u32>, u32)> = if order == 1 {
                vec![(self.tx, None, ROOT)]
            } else {
                level
                    .iter()
                    .map(|&i| {
                        let node = self.nodes[i as usize];
                        (node.image, Some(node.plane), i)
                    })
                    .collect()
            };
            for (src, prev_plane, parent) in sources {
                for (pi, plane) in self.planes.iter().enumerate() {
                    if let Some(prev) = prev_plane {
                        if !visible[prev as usize * n + pi] {
                            continue;
                        }
                    }
                    if plane.signed_distance(src) <= GEOM_EPS {
                        continue;
                    }
                    let idx = self.nodes.len() as u32;
                    self.nodes.push(ImageNode {
                        image: plane.mirror(src),
                        plane: pi as u32,
                        parent,
                    });
                    next.push(idx);
                }
            }
            level = next;
        }
    }

    fn occluded(&self, a: Vec3, b: Vec3) -> bool {
        let len = a.distance(b);
        self.obstacles.iter().any(|ob| {
            ob.clip_segment(a, b)
                .is_some_and(|(t0, t1)| (t1 - t0) * len > OCCLUSION_EPS_M)
        })
    }

    fn foliage_along(&self, vertices: &[Vec3]) -> (f64, Vec<Interaction>) {
        let mut depth = 0.0;
        let mut marks = Vec::new();
        for w in vertices.windows(2) {
            for (i, f) in self.foliage.iter().enumerate() {
                if let Some((t0, t1)) = f.clip_segment(w[0], w[1]) {
                    let chord = (t1 - t0) * w[0].distance(w[1]);
                    if chord > OCCLUSION_EPS_M {
                        depth += chord;
                        marks.push(Interaction {
                            kind: InteractionKind::FoliagePenetration,
                            surface: SurfaceRef::Foliage { block: i },
                            point: w[0].lerp(w[1], 0.5 * (t0 + t1)),
                        });
                    }
                }
            }
        }
        (depth, marks)
    }

    fn make_path(
        &self,
        vertices: Vec<Vec3>,
        mut interactions: Vec<Interaction>,
        bounces: Vec<Bounce>,
        edge: Option<KnifeEdge>,
    ) -> GeometricPath {
        let (foliage_depth, marks) = self.foliage_along(&vertices);
        interactions.extend(marks);
        GeometricPath {
            vertices,
            interactions,
            bounces,
            edge,
            foliage_depth,
        }
    }

    /// All unoccluded paths to `rx`, independent of carrier frequency.
    pub fn geometric_paths(&self, rx: Vec3) -> Result<Vec<GeometricPath>, TraceError> {
        self.check_terminal(rx, "receiver")?;
        let tx = self.tx;
        if tx.distance(rx) <= GEOM_EPS {
            return Err(TraceError::Geometry {
                surface: "transmitter".into(),
                detail: "receiver coincides with transmitter".into(),
            });
        }
        let bounds = self.scene.bounds();
        let mut paths = Vec::new();

        let los_blocked = self.occluded(tx, rx);
        if !los_blocked {
            paths.push(self.make_path(
                vec![tx, rx],
                vec![Interaction {
                    kind: InteractionKind::LineOfSight,
                    surface: SurfaceRef::Direct,
                    point: rx,
                }],
                Vec::new(),
                None,
            ));
        } else if self.cfg.diffraction {
            if let Some(p) = self.rooftop_path(rx) {
                paths.push(p);
            }
        }

        let mut chain: Vec<u32> = Vec::with_capacity(4);
        let mut points: Vec<Vec3> = Vec::with_capacity(4);
        'nodes: for node in &self.nodes {
            let plane = &self.planes[node.plane as usize];
            if plane.signed_distance(rx) <= GEOM_EPS {
                continue;
            }
            if node.image.distance(rx) <= GEOM_EPS {
                return Err(TraceError::Geometry {
                    surface: plane.describe(self.scene),
                    detail: "receiver coincides with an image source".into(),
                });
            }
            // Walk back from the receiver through the chain of images.
            chain.clear();
            points.clear();
            let mut target = rx;
            let mut cur = *node;
            loop {
                let pl = &self.planes[cur.plane as usize];
                let sd_t = pl.signed_distance(target);
                if sd_t <= GEOM_EPS {
                    continue 'nodes;
                }
                let sd_i = pl.signed_distance(cur.image);
                let t = sd_t / (sd_t - sd_i);
                let mut hit = target.lerp(cur.image, t);
                // Snap onto the plane to kill rounding drift.
                match pl.axis {
                    Axis::X => hit.x = pl.coord,
                    Axis::Y => hit.y = pl.coord,
                    Axis::Z => hit.z = pl.coord,
                }
                if !pl.contains(hit, &bounds) {
                    continue 'nodes;
                }
                chain.push(cur.plane);
                points.push(hit);
                target = hit;
                if cur.parent == ROOT {
                    break;
                }
                cur = self.nodes[cur.parent as usize];
            }
            // The transmitter must see the first bounce from the front.
            if self.planes[*chain.last().unwrap() as usize].signed_distance(tx) <= GEOM_EPS {
                continue;
            }
            let mut vertices = Vec::with_capacity(points.len() + 2);
            vertices.push(tx);
            vertices.extend(points.iter().rev());
            vertices.push(rx);
            if vertices.windows(2).any(|w| self.occluded(w[0], w[1])) {
                continue;
            }
            let mut interactions = Vec::with_capacity(chain.len());
            let mut bounces = Vec::with_capacity(chain.len());
            for (k, &pi) in chain.iter().rev().enumerate() {
                let pl = &self.planes[pi as usize];
                let incoming = (vertices[k + 1] - vertices[k]).normalized();
                let grazing = incoming.dot(pl.normal()).abs().clamp(0.0, 1.0).asin();
                interactions.push(Interaction {
                    kind: if pl.extent.is_none() {
                        InteractionKind::GroundReflection
                    } else {
                        InteractionKind::FacadeReflection
                    },
                    surface: pl.surface,
                    point: vertices[k + 1],
                });
                bounces.push(Bounce {
                    material: pl.material,
                    polarization: pl.polarization(),
                    grazing,
                });
            }
            paths.push(self.make_path(vertices, interactions, bounces, None));
        }
        Ok(paths)
    }

    /// Diffraction over the rooftop edge that obstructs the direct ray most.
    fn rooftop_path(&self, rx: Vec3) -> Option<GeometricPath> {
        let tx = self.tx;
        let total = tx.distance(rx);
        let mut best: Option<(f64, usize, Vec3, KnifeEdge)> = None;
        for (i, ob) in self.obstacles.iter().enumerate() {
            let Some((t0, t1)) = ob.clip_ground_projection(tx, rx) else {
                continue;
            };
            for t in [t0, t1] {
                if t <= 0.0 || t >= 1.0 {
                    continue;
                }
                let on_ray = tx.lerp(rx, t);
                let edge = KnifeEdge {
                    clearance: ob.height - on_ray.z,
                    d_tx: t * total,
                    d_rx: (1.0 - t) * total,
                };
                if edge.clearance <= 0.0 {
                    continue;
                }
                // nu up to the common sqrt(2 / lambda) factor.
                let score =
                    edge.clearance * ((edge.d_tx + edge.d_rx) / (edge.d_tx * edge.d_rx)).sqrt();
                if best.as_ref().is_none_or(|b| score > b.0) {
                    best = Some((score, i, Vec3::new(on_ray.x, on_ray.y, ob.height), edge));
                }
            }
        }
        let (_, obstacle, point, edge) = best?;
        Some(self.make_path(
            vec![tx, point, rx],
            vec![Interaction {
                kind: InteractionKind::RooftopDiffraction,
                surface: SurfaceRef::Rooftop { obstacle },
                point,
            }],
            Vec::new(),
            Some(edge),
        ))
    }

    /// Paths to `rx` at carrier `f_c`, sorted by delay, after the dynamic-range cut.
    pub fn trace(&self, rx: Vec3, f_c: f64) -> Result<Vec<PathComponent>, TraceError> {
        let geo = self.geometric_paths(rx)?;
        evaluate_paths(&geo, f_c, &self.cfg)
    }
}

fn build_planes(scene: &Scene) -> Vec<Plane> {
    let mut planes = vec![Plane {
        axis: Axis::Z,
        coord: 0.0,
        outward: 1.0,
        extent: None,
        material: scene.ground,
        surface: SurfaceRef::Ground,
    }];
    for (i, b) in scene.obstacles().enumerate() {
        let r = b.footprint;
        let h = b.height;
        let faces = [
            (Axis::X, r.x0, -1.0, (r.y0, r.y1), Face::MinusX),
            (Axis::X, r.x1, 1.0, (r.y0, r.y1), Face::PlusX),
            (Axis::Y, r.y0, -1.0, (r.x0, r.x1), Face::MinusY),
            (Axis::Y, r.y1, 1.0, (r.x0, r.x1), Face::PlusY),
        ];
        for (axis, coord, outward, (lo, hi), face) in faces {
            planes.push(Plane {
                axis,
                coord,
                outward,
                extent: Some((lo, hi, h)),
                material: b.material,
                surface: SurfaceRef::Facade { obstacle: i, face },
            });
        }
    }
    planes
}

/// Complex gains of geometric paths at carrier `f_c`; applies antenna
/// patterns, Fresnel coefficients, knife-edge and foliage losses, then the
/// dynamic-range cut. Output is sorted by delay.
pub fn evaluate_paths(
    paths: &[GeometricPath],
    f_c: f64,
    cfg: &TraceConfig,
) -> Result<Vec<PathComponent>, TraceError> {
    let lambda = wavelength(f_c);
    let mut out = Vec::with_capacity(paths.len());
    let mut cache: Vec<(MaterialKind, Permittivity)> = Vec::new();
    for p in paths {
        let length = p.length();
        let mut amplitude = lambda / (4.0 * PI * length);
        let mut phase = -2.0 * PI * (length / lambda).fract();
        for b in &p.bounces {
            let eta = match cache.iter().find(|(m, _)| *m == b.material) {
                Some((_, e)) => *e,
                None => {
                    let e = material_permittivity(b.material, f_c)?;
                    cache.push((b.material, e));
                    e
                }
            };
            let gamma = fresnel_reflection(eta, b.grazing, b.polarization);
            amplitude *= gamma.norm();
            phase += gamma.arg();
        }
        if let Some(edge) = p.edge {
            amplitude *= 10f64.powf(-knife_edge_loss(edge.nu(lambda)) / 20.0);
            phase += DIFFRACTION_PHASE;
        }
        amplitude *= 10f64.powf(-foliage_loss(p.foliage_depth, f_c)? / 20.0);
        if cfg.antenna == Antenna::HalfWaveDipole {
            let g_tx = dipole_gain(p.departure().z.clamp(-1.0, 1.0).acos());
            let g_rx = dipole_gain(p.arrival().z.clamp(-1.0, 1.0).acos());
            amplitude *= (g_tx * g_rx).sqrt();
        }
        out.push(PathComponent {
            amplitude,
            phase: wrap_phase(phase),
            delay: length / SPEED_OF_LIGHT,
            interactions: p.interactions.clone(),
            frequency: f_c,
        });
    }
    let strongest = out.iter().map(|p| p.amplitude).fold(0.0, f64::max);
    let floor = strongest * 10f64.powf(-cfg.cut_db / 20.0);
    out.retain(|p| p.amplitude > 0.0 && p.amplitude >= floor);
    out.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    Ok(out)
}

/// Convenience wrapper: builds a [`Tracer`] and traces a single link.
pub fn trace(
    scene: &Scene,
    tx: Vec3,
    rx: Vec3,
    f_c: f64,
    cfg: &TraceConfig,
) -> Result<Vec<PathComponent>, TraceError> {
    Tracer::new(scene, tx, *cfg)?.trace(rx, f_c)
}

/// One `path <idx> kind=<chain> delay_ns=<v> gain_db=<v> phase_rad=<v>` line per path.
pub fn path_dump(paths: &[PathComponent]) -> String {
    let mut s = String::new();
    for (i, p) in paths.iter().enumerate() {
        s.push_str(&format!(
            "path {} kind={} delay_ns={} gain_db={} phase_rad={}\n",
            i,
            p.chain(),
            g6(p.delay * 1e9),
            g6(p.gain_db()),
            g6(p.phase)
        ));
    }
    s
}
