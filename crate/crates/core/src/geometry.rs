//! Scene vocabulary and gaze-ray geometry.
//!
//! Everything here is generic over the scalar type so the same code runs in
//! `f32` on embedded perception front-ends and `f64` in the engine. The rest
//! of the crate uses the `f64` aliases exported at the crate root.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::Float;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::GeometryError;

/// Metric position or direction. Right-handed, robot eye midpoint at the
/// origin, `+z` toward the partner's nominal seat.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<F> {
    pub x: F,
    pub y: F,
    pub z: F,
}

impl<F: Float> Vec3<F> {
    pub fn new(x: F, y: F, z: F) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(F::zero(), F::zero(), F::zero())
    }

    pub fn dot(self, other: Self) -> F {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> F {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Self) -> F {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction, or `None` for zero or non-finite input.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if !self.is_finite() || !n.is_finite() || n <= F::zero() {
            return None;
        }
        Some(self * (F::one() / n))
    }

    pub fn to_array(self) -> [F; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [F; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Convert between scalar types.
    pub fn cast<G: Float>(self) -> Option<Vec3<G>> {
        Some(Vec3::new(G::from(self.x)?, G::from(self.y)?, G::from(self.z)?))
    }
}

impl<F: Float> Add for Vec3<F> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<F: Float> Sub for Vec3<F> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<F: Float> Mul<F> for Vec3<F> {
    type Output = Self;
    fn mul(self, rhs: F) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl<F: Float> Neg for Vec3<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

// Wire form is a bare `[x, y, z]` array.
impl<F: Float + Serialize> Serialize for Vec3<F> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.z].serialize(s)
    }
}

impl<'de, F: Float + Deserialize<'de>> Deserialize<'de> for Vec3<F> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[F; 3]>::deserialize(d)?;
        let v = Vec3::from_array(a);
        if !v.is_finite() {
            return Err(serde::de::Error::custom("vector components must be finite"));
        }
        Ok(v)
    }
}

/// A fused gaze ray: origin at the eye midpoint, unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeRay<F> {
    origin: Vec3<F>,
    direction: Vec3<F>,
}

impl<F: Float> GazeRay<F> {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3<F>, direction: Vec3<F>) -> Result<Self, GeometryError> {
        if !origin.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let direction = direction.normalized().ok_or(GeometryError::DegenerateDirection)?;
        Ok(Self { origin, direction })
    }

    /// Ray from `origin` aimed at `target`.
    pub fn toward(origin: Vec3<F>, target: Vec3<F>) -> Result<Self, GeometryError> {
        if origin == target {
            return Err(GeometryError::CoincidentPoint);
        }
        Self::new(origin, target - origin)
    }

    pub fn origin(&self) -> Vec3<F> {
        self.origin
    }

    pub fn direction(&self) -> Vec3<F> {
        self.direction
    }
}

/// Angle in `[0, π]` between the ray direction and the direction from the
/// ray origin to `point`.
pub fn angular_distance<F: Float>(ray: &GazeRay<F>, point: Vec3<F>) -> Result<F, GeometryError> {
    let v = point - ray.origin;
    if !v.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    if v.norm() <= F::zero() {
        return Err(GeometryError::CoincidentPoint);
    }
    // atan2 keeps precision near 0 and π where acos does not.
    let cross = ray.direction.cross(v).norm();
    let dot = ray.direction.dot(v);
    Ok(cross.atan2(dot))
}

/// Which side of the dyad an agent is on. `Robot` is the self side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Agent {
    #[serde(rename = "self")]
    Robot,
    #[serde(rename = "other")]
    Partner,
}

impl Agent {
    pub fn counterpart(self) -> Self {
        match self {
            Agent::Robot => Agent::Partner,
            Agent::Partner => Agent::Robot,
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Agent::Robot => "self",
            Agent::Partner => "other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Float + Serialize",
    deserialize = "F: Float + Deserialize<'de>"
))]
pub struct SceneObject<F> {
    pub id: String,
    pub label: String,
    #[serde(rename = "pos")]
    pub position: Vec3<F>,
}

impl<F: Float> SceneObject<F> {
    pub fn new(id: impl Into<String>, label: impl Into<String>, position: Vec3<F>) -> Self {
        Self { id: id.into(), label: label.into(), position }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose<F> {
    pub agent: Agent,
    pub face_center: Vec3<F>,
    pub gaze: GazeRay<F>,
}

impl<F: Float> AgentPose<F> {
    /// Pose whose gaze ray starts at the face center.
    pub fn new(agent: Agent, face_center: Vec3<F>, direction: Vec3<F>) -> Result<Self, GeometryError> {
        Ok(Self { agent, face_center, gaze: GazeRay::new(face_center, direction)? })
    }
}

/// The world a gaze ray is resolved against.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene<F> {
    pub objects: Vec<SceneObject<F>>,
    pub self_pose: AgentPose<F>,
    pub other_pose: AgentPose<F>,
}

impl<F: Float> Scene<F> {
    pub fn new(
        objects: Vec<SceneObject<F>>,
        self_pose: AgentPose<F>,
        other_pose: AgentPose<F>,
    ) -> Result<Self, GeometryError> {
        check_unique_ids(&objects)?;
        if self_pose.agent != Agent::Robot || other_pose.agent != Agent::Partner {
            return Err(GeometryError::PoseRole);
        }
        Ok(Self { objects, self_pose, other_pose })
    }

    pub fn pose(&self, agent: Agent) -> &AgentPose<F> {
        match agent {
            Agent::Robot => &self.self_pose,
            Agent::Partner => &self.other_pose,
        }
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject<F>> {
        self.objects.iter().find(|o| o.id == id)
    }
}

pub(crate) fn check_unique_ids<F>(objects: &[SceneObject<F>]) -> Result<(), GeometryError> {
    let mut ids: Vec<&str> = objects.iter().map(|o| o.id.as_str()).collect();
    ids.sort_unstable();
    match ids.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(GeometryError::DuplicateObject(w[0].to_string())),
        None => Ok(()),
    }
}

/// Where an agent's attention lands.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GazeTarget {
    Partner,
    Object(String),
    Unresolved,
}

impl GazeTarget {
    pub fn object_id(&self) -> Option<&str> {
        match self {
            GazeTarget::Object(id) => Some(id),
            _ => None,
        }
    }

    pub fn is_resolved(&self) -> bool {
        !matches!(self, GazeTarget::Unresolved)
    }
}

impl fmt::Display for GazeTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GazeTarget::Partner => f.write_str("partner"),
            GazeTarget::Unresolved => f.write_str("unresolved"),
            GazeTarget::Object(id) => write!(f, "object:{id}"),
        }
    }
}

impl std::str::FromStr for GazeTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "partner" => Ok(GazeTarget::Partner),
            "unresolved" => Ok(GazeTarget::Unresolved),
            _ => match s.strip_prefix("object:") {
                Some(id) if !id.is_empty() => Ok(GazeTarget::Object(id.to_string())),
                _ => Err(format!("unknown gaze target `{s}`")),
            },
        }
    }
}

impl Serialize for GazeTarget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GazeTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig<F> {
    /// Radians.
    pub cone_half_angle: F,
    /// Meters. Only used to validate ingested face positions.
    pub face_hit_radius: F,
}

impl<F: Float> Default for GeometryConfig<F> {
    fn default() -> Self {
        Self {
            cone_half_angle: F::from(0.1745).unwrap(),
            face_hit_radius: F::from(0.12).unwrap(),
        }
    }
}

impl<F: Float> GeometryConfig<F> {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let half_pi = F::from(std::f64::consts::FRAC_PI_2).unwrap();
        if !(self.cone_half_angle > F::zero() && self.cone_half_angle < half_pi) {
            return Err(GeometryError::Config("cone_half_angle must lie in (0, π/2)"));
        }
        if !(self.face_hit_radius > F::zero()) {
            return Err(GeometryError::Config("face_hit_radius must be positive"));
        }
        Ok(())
    }
}

struct Candidate<'a, F> {
    angle: F,
    is_object: bool,
    range: F,
    id: &'a str,
    target: GazeTarget,
}

fn candidate_order<F: Float>(a: &Candidate<'_, F>, b: &Candidate<'_, F>) -> Ordering {
    a.angle
        .partial_cmp(&b.angle)
        .unwrap_or(Ordering::Equal)
        .then(a.is_object.cmp(&b.is_object))
        .then(a.range.partial_cmp(&b.range).unwrap_or(Ordering::Equal))
        .then(a.id.cmp(b.id))
}

/// Resolves a ray against an optional counterpart face and a set of objects.
///
/// The in-cone candidate with the smallest angle wins. Exact angle ties go to
/// the partner face, then to the nearer candidate, then to the smaller id.
/// Candidates that coincide with the ray origin are skipped.
pub fn resolve_among<F: Float>(
    ray: &GazeRay<F>,
    counterpart_face: Option<Vec3<F>>,
    objects: &[SceneObject<F>],
    cfg: &GeometryConfig<F>,
) -> GazeTarget {
    let origin = ray.origin();
    let face = counterpart_face.map(|p| (p, false, "", GazeTarget::Partner));
    let objs = objects
        .iter()
        .map(|o| (o.position, true, o.id.as_str(), GazeTarget::Object(o.id.clone())));

    face.into_iter()
        .chain(objs)
        .filter_map(|(pos, is_object, id, target)| {
            let angle = angular_distance(ray, pos).ok()?;
            (angle <= cfg.cone_half_angle).then(|| Candidate {
                angle,
                is_object,
                range: origin.distance(pos),
                id,
                target,
            })
        })
        .min_by(candidate_order)
        .map(|c| c.target)
        .unwrap_or(GazeTarget::Unresolved)
}

/// Target of `ray` cast by `observer` in `scene`. The observer's own face is
/// never a candidate.
pub fn resolve_gaze_target<F: Float>(
    ray: &GazeRay<F>,
    scene: &Scene<F>,
    cfg: &GeometryConfig<F>,
    observer: Agent,
) -> GazeTarget {
    let counterpart = scene.pose(observer.counterpart()).face_center;
    resolve_among(ray, Some(counterpart), &scene.objects, cfg)
}
