//! Synthetic collection planning.
//!
//! Cameras are placed on a half-dome around a component-labeled vessel model,
//! each component's 3D box is projected through a pinhole camera, and each
//! pose is assigned to the oblique or near-nadir stratum by elevation.
//!
//! Vessel frame: +X toward the bow, +Y to starboard, +Z up. Azimuth is measured
//! from +X toward +Y, so azimuth 90 is the starboard beam and 270 the port beam.
//! Camera frame: x right, y down, z along the viewing direction; the principal
//! point is the image center.
//!
//! Visibility only accounts for the camera frustum and the optional facing
//! normal of a component. Occlusion by the superstructure is not modeled; plan
//! files carry an `occluded` slot per box for a renderer to fill in.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{
    ClassId, ClassVocabulary, DatasetManifest, GroundTruthBox, ImageRecord, SourceEncoding,
};
use crate::boxmath::{clip_to_image, Box2D, ImageDims};

/// Golden angle in degrees.
pub const GOLDEN_ANGLE_DEG: f64 = 137.50776405;
pub const DEFAULT_NADIR_CUTOFF_DEG: f64 = 70.0;
pub const PLAN_FORMAT: &str = "detbench-plan/1";

/// A four-component destroyer scene: port and starboard radar panels, fore and
/// aft launcher fields.
pub const SAMPLE_SCENE_JSON: &str = include_str!("../data/sample_scene.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("scene has no components")]
    EmptyScene,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid plan parameter: {0}")]
    InvalidParameter(String),
    #[error("camera radius {radius} does not clear the vessel bounding radius {bounding}")]
    CameraInsideScene { radius: f64, bounding: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub pose_id: String,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub radius: f64,
    #[serde(default)]
    pub look_at: [f64; 3],
}

impl CameraPose {
    fn direction(&self) -> Vector3<f64> {
        let (az, el) = (self.azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    pub fn position(&self) -> Point3<f64> {
        Point3::from(self.look_at) + self.direction() * self.radius
    }

    /// Camera looking at `look_at` with world +Z as up. At the zenith the image
    /// x axis keeps the orientation it has just below it.
    pub fn frame(&self) -> CameraFrame {
        let az = self.azimuth_deg.to_radians();
        let forward = -self.direction();
        let right = Vector3::new(-az.sin(), az.cos(), 0.0);
        let down = forward.cross(&right);
        let m = Matrix3::from_columns(&[right, down, forward]);
        CameraFrame {
            position: self.position(),
            orientation: Rotation3::from_matrix_unchecked(m),
        }
    }
}

/// Camera pose as a rigid frame; columns of `orientation` are the camera's
/// right, down and forward axes in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame {
    pub position: Point3<f64>,
    pub orientation: Rotation3<f64>,
}

impl CameraFrame {
    pub fn to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.orientation.inverse() * (p - self.position)
    }

    pub fn transformed(&self, t: &Isometry3<f64>) -> Self {
        Self {
            position: t * self.position,
            orientation: t.rotation.to_rotation_matrix() * self.orientation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub focal_px: f64,
    pub dims: ImageDims,
}

impl Intrinsics {
    pub fn new(focal_px: f64, dims: ImageDims) -> Result<Self, PlanError> {
        if !(focal_px.is_finite() && focal_px > 0.0) {
            return Err(PlanError::InvalidParameter(format!(
                "focal length must be positive, got {focal_px}"
            )));
        }
        Ok(Self { focal_px, dims })
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.dims.width as f64 / 2.0, self.dims.height as f64 / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledComponent {
    pub class_id: ClassId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facing_normal: Option<[f64; 3]>,
}

impl LabeledComponent {
    pub fn check(&self) -> Result<(), String> {
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err("center must be finite".into());
        }
        if !self.half_extents.iter().all(|h| h.is_finite() && *h > 0.0) {
            return Err(format!("half extents must be positive, got {:?}", self.half_extents));
        }
        if let Some(n) = self.facing_normal {
            let norm = Vector3::from(n).norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(format!("facing normal {n:?} has length {norm}, expected 1"));
            }
        }
        Ok(())
    }

    pub fn solid(&self) -> ComponentSolid {
        let c = Point3::from(self.center);
        let h = Vector3::from(self.half_extents);
        let mut corners = [Point3::origin(); 8];
        for (i, corner) in corners.iter_mut().enumerate() {
            let sign = |bit: usize| if i & bit == 0 { -1.0 } else { 1.0 };
            *corner = c + Vector3::new(sign(1) * h.x, sign(2) * h.y, sign(4) * h.z);
        }
        ComponentSolid {
            center: c,
            corners,
            facing_normal: self.facing_normal.map(|n| Unit::new_unchecked(Vector3::from(n))),
        }
    }
}

/// A component's box in world space, possibly after a rigid transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSolid {
    pub center: Point3<f64>,
    pub corners: [Point3<f64>; 8],
    pub facing_normal: Option<Unit<Vector3<f64>>>,
}

impl ComponentSolid {
    pub fn transformed(&self, t: &Isometry3<f64>) -> Self {
        Self {
            center: t * self.center,
            corners: self.corners.map(|p| t * p),
            facing_normal: self.facing_normal.map(|n| t.rotation * n),
        }
    }
}

/// Projects a solid to its clipped 2D hull, or `None` when it is behind the
/// camera, facing away, or outside the image.
pub fn project_solid(solid: &ComponentSolid, cam: &CameraFrame, k: &Intrinsics) -> Option<Box2D> {
    if let Some(n) = solid.facing_normal {
        if n.dot(&(cam.position - solid.center)) <= 0.0 {
            return None;
        }
    }
    let (cx, cy) = k.principal_point();
    let mut hull = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in &solid.corners {
        let q = cam.to_camera(p);
        if q.z <= 0.0 {
            return None;
        }
        let u = cx + k.focal_px * q.x / q.z;
        let v = cy + k.focal_px * q.y / q.z;
        hull = [hull[0].min(u), hull[1].min(v), hull[2].max(u), hull[3].max(v)];
    }
    let raw = Box2D::try_from(hull).ok()?;
    let clipped = clip_to_image(&raw, k.dims);
    (!clipped.is_degenerate()).then_some(clipped)
}

pub fn project_component(
    c: &LabeledComponent,
    pose: &CameraPose,
    k: &Intrinsics,
) -> Option<GroundTruthBox> {
    project_solid(&c.solid(), &pose.frame(), k).map(|bbox| GroundTruthBox {
        class_id: c.class_id,
        bbox,
        encoding: SourceEncoding::Pixel,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub vessel: String,
    pub bounding_radius: f64,
    pub classes: Vec<String>,
    pub components: Vec<LabeledComponent>,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let scene: Self =
            serde_json::from_str(text).map_err(|e| PlanError::InvalidScene(e.to_string()))?;
        scene.check()?;
        Ok(scene)
    }

    pub fn sample() -> Self {
        Self::from_json(SAMPLE_SCENE_JSON).expect("bundled sample scene is valid")
    }

    pub fn vocabulary(&self) -> Result<ClassVocabulary, PlanError> {
        ClassVocabulary::from_names(self.classes.iter().cloned())
            .map_err(|e| PlanError::InvalidScene(e.to_string()))
    }

    pub fn check(&self) -> Result<(), PlanError> {
        if !(self.bounding_radius.is_finite() && self.bounding_radius > 0.0) {
            return Err(PlanError::InvalidScene(format!(
                "bounding radius must be positive, got {}",
                self.bounding_radius
            )));
        }
        self.vocabulary()?;
        for (i, c) in self.components.iter().enumerate() {
            c.check()
                .map_err(|e| PlanError::InvalidScene(format!("component {i}: {e}")))?;
            if c.class_id as usize >= self.classes.len() {
                return Err(PlanError::InvalidScene(format!(
                    "component {i}: class id {} has no class name",
                    c.class_id
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic golden-angle spiral over the spherical cap above `min_elevation_deg`.
///
/// Pose `i` has `sin(elevation) = s0 + (1 - s0) * (i + 0.5) / n`, where `s0` is
/// the sine of the minimum elevation, and azimuth `i * 137.50776405 mod 360`.
/// With a seed, each pose is moved by a uniform offset of up to half the
/// spacing in both directions.
pub fn sample_half_dome(
    n: usize,
    radius: f64,
    min_elevation_deg: f64,
    jitter_seed: Option<u64>,
) -> Result<Vec<CameraPose>, PlanError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(PlanError::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if !(0.0..90.0).contains(&min_elevation_deg) {
        return Err(PlanError::InvalidParameter(format!(
            "minimum elevation must lie in [0, 90), got {min_elevation_deg}"
        )));
    }
    let s0 = min_elevation_deg.to_radians().sin();
    let mut rng = jitter_seed.map(ChaCha8Rng::seed_from_u64);
    // Mean angular spacing of n points on the cap, in radians.
    let spacing = (2.0 * std::f64::consts::PI * (1.0 - s0) / n.max(1) as f64).sqrt();

    let poses = (0..n)
        .map(|i| {
            let (du, dv) = match rng.as_mut() {
                Some(r) => (r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5)),
                None => (0.0, 0.0),
            };
            let t = (i as f64 + 0.5 + du) / n as f64;
            let s = (s0 + (1.0 - s0) * t).min(1.0);
            let elevation = s.asin().to_degrees().clamp(min_elevation_deg, 90.0);
            let cos_el = elevation.to_radians().cos().max(1e-6);
            let az_jitter = (dv * spacing / cos_el).to_degrees().clamp(-180.0, 180.0);
            let azimuth = (i as f64 * GOLDEN_ANGLE_DEG + az_jitter).rem_euclid(360.0);
            CameraPose {
                pose_id: format!("pose_{i:04}"),
                azimuth_deg: azimuth,
                elevation_deg: elevation,
                radius,
                look_at: [0.0; 3],
            }
        })
        .collect();
    Ok(poses)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Oblique,
    NearNadir,
}

impl Stratum {
    pub const ALL: [Stratum; 2] = [Stratum::Oblique, Stratum::NearNadir];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Oblique => "oblique",
            Self::NearNadir => "near_nadir",
        }
    }
}

pub fn classify_stratum(pose: &CameraPose, nadir_cutoff_deg: f64) -> Stratum {
    if pose.elevation_deg >= nadir_cutoff_deg {
        Stratum::NearNadir
    } else {
        Stratum::Oblique
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum IntrinsicsPolicy {
    /// Focal length chosen so the vessel's bounding sphere spans 1/1.2 of the
    /// smaller image side.
    Auto { dims: ImageDims },
    Explicit(Intrinsics),
}

impl Default for IntrinsicsPolicy {
    fn default() -> Self {
        Self::Auto {
            dims: ImageDims {
                width: 640,
                height: 640,
            },
        }
    }
}

impl IntrinsicsPolicy {
    pub fn resolve(&self, radius: f64, bounding_radius: f64) -> Result<Intrinsics, PlanError> {
        match *self {
            Self::Explicit(k) => Intrinsics::new(k.focal_px, k.dims),
            Self::Auto { dims } => {
                if radius <= bounding_radius {
                    return Err(PlanError::CameraInsideScene {
                        radius,
                        bounding: bounding_radius,
                    });
                }
                let half_angle = (bounding_radius / radius).asin();
                let target = dims.width.min(dims.height) as f64 / 1.2;
                Intrinsics::new(target / (2.0 * half_angle.tan()), dims)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub poses: usize,
    pub radius: f64,
    pub min_elevation_deg: f64,
    pub nadir_cutoff_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_seed: Option<u64>,
    pub intrinsics: IntrinsicsPolicy,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            poses: 64,
            radius: 400.0,
            min_elevation_deg: 10.0,
            nadir_cutoff_deg: DEFAULT_NADIR_CUTOFF_DEG,
            jitter_seed: None,
            intrinsics: IntrinsicsPolicy::default(),
        }
    }
}

/// Camera extrinsics as written to plan files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraExtrinsics {
    pub position: [f64; 3],
    pub right: [f64; 3],
    pub down: [f64; 3],
    pub forward: [f64; 3],
}

impl From<&CameraFrame> for CameraExtrinsics {
    fn from(f: &CameraFrame) -> Self {
        let m = f.orientation.matrix();
        let col = |i: usize| [m[(0, i)], m[(1, i)], m[(2, i)]];
        Self {
            position: f.position.coords.into(),
            right: col(0),
            down: col(1),
            forward: col(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedBox {
    pub component: usize,
    pub class_id: ClassId,
    pub bbox: Box2D,
    /// Reserved for renderer-computed occlusion; the planner leaves it unset.
    pub occluded: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPose {
    pub pose: CameraPose,
    pub stratum: Stratum,
    pub camera: CameraExtrinsics,
    pub boxes: Vec<PlannedBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionPlan {
    pub format: String,
    pub vessel: String,
    pub classes: Vec<String>,
    pub intrinsics: Intrinsics,
    pub params: PlanParams,
    pub poses: Vec<PlannedPose>,
}

impl CollectionPlan {
    pub fn stratum_sizes(&self) -> BTreeMap<Stratum, usize> {
        let mut sizes: BTreeMap<Stratum, usize> = Stratum::ALL.iter().map(|s| (*s, 0)).collect();
        for p in &self.poses {
            *sizes.entry(p.stratum).or_default() += 1;
        }
        sizes
    }
}

pub fn generate_plan(scene: &SceneSpec, params: &PlanParams) -> Result<CollectionPlan, PlanError> {
    scene.check()?;
    if scene.components.is_empty() {
        return Err(PlanError::EmptyScene);
    }
    if params.poses == 0 {
        return Err(PlanError::InvalidParameter("at least one pose is required".into()));
    }
    if !(params.nadir_cutoff_deg > 0.0 && params.nadir_cutoff_deg < 90.0) {
        return Err(PlanError::InvalidParameter(format!(
            "nadir cutoff must lie in (0, 90), got {}",
            params.nadir_cutoff_deg
        )));
    }
    let k = params.intrinsics.resolve(params.radius, scene.bounding_radius)?;
    let poses = sample_half_dome(
        params.poses,
        params.radius,
        params.min_elevation_deg,
        params.jitter_seed,
    )?;
    let solids: Vec<ComponentSolid> = scene.components.iter().map(LabeledComponent::solid).collect();

    let planned = poses
        .into_iter()
        .map(|pose| {
            let frame = pose.frame();
            let boxes = scene
                .components
                .iter()
                .zip(&solids)
                .enumerate()
                .filter_map(|(component, (c, solid))| {
                    project_solid(solid, &frame, &k).map(|bbox| PlannedBox {
                        component,
                        class_id: c.class_id,
                        bbox,
                        occluded: None,
                    })
                })
                .collect();
            PlannedPose {
                stratum: classify_stratum(&pose, params.nadir_cutoff_deg),
                camera: CameraExtrinsics::from(&frame),
                pose,
                boxes,
            }
        })
        .collect();

    Ok(CollectionPlan {
        format: PLAN_FORMAT.to_owned(),
        vessel: scene.vessel.clone(),
        classes: scene.classes.clone(),
        intrinsics: k,
        params: params.clone(),
        poses: planned,
    })
}

pub type StrataMap = BTreeMap<String, BTreeSet<String>>;

/// One manifest record per pose plus the stratum membership of every pose.
/// Both strata are always present, possibly empty.
pub fn plan_to_manifest(plan: &CollectionPlan) -> Result<(DatasetManifest, StrataMap), PlanError> {
    let classes = ClassVocabulary::from_names(plan.classes.iter().cloned())
        .map_err(|e| PlanError::InvalidScene(e.to_string()))?;
    let mut strata: StrataMap = Stratum::ALL
        .iter()
        .map(|s| (s.as_str().to_owned(), BTreeSet::new()))
        .collect();
    let images = plan
        .poses
        .iter()
        .map(|p| {
            strata
                .get_mut(p.stratum.as_str())
                .expect("every stratum is pre-seeded")
                .insert(p.pose.pose_id.clone());
            ImageRecord {
                image_id: p.pose.pose_id.clone(),
                path: format!("{}.png", p.pose.pose_id),
                dims: plan.intrinsics.dims,
                boxes: p
                    .boxes
                    .iter()
                    .map(|b| GroundTruthBox {
                        class_id: b.class_id,
                        bbox: b.bbox,
                        encoding: SourceEncoding::Pixel,
                    })
                    .collect(),
                pose_ref: Some(p.pose.pose_id.clone()),
            }
        })
        .collect();
    let manifest = DatasetManifest {
        split_name: "synthetic".to_owned(),
        classes,
        images,
    };
    Ok((manifest, strata))
}
