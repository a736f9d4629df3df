//! Dyadic social-gaze engine.
//!
//! Two agents, a robot (`self`) and its partner (`other`), are each assigned
//! one of five gaze states: partner-oriented (PO), object-oriented (OO),
//! introspective (INT), responding to joint attention (RJA) and initiating
//! joint attention (IJA). The ordered pair forms a 5×5 dyad state space with
//! a stability flag and a gate at (PO, PO). The robot's next intended state
//! is drawn from a guarded probabilistic transition model and expanded into
//! timed gaze actions.
//!
//! Pipeline: [`events`] turns sensor frames into target samples and
//! fixations, [`classifier`] maps fixation histories to states, and
//! [`controller`] decides what the robot looks at next. [`engine`] ties them
//! into one tick; [`simulator`], [`replay`] and [`session`] drive it.
//!
//! Geometry is generic over the scalar type; the aliases below fix it to
//! `f64`, which is what the rest of the engine uses.

pub mod classifier;
pub mod config;
pub mod controller;
pub mod engine;
pub mod error;
pub mod events;
pub mod geometry;
pub mod replay;
pub mod rng;
pub mod session;
pub mod simulator;
pub mod trace;

pub use classifier::{AgentGazeState, ClassifierConfig, DyadState, PairKey, StabilityTable};
pub use config::EngineConfig;
pub use controller::{BehaviorProfile, GazeAction, GuardTable, TransitionModel};
pub use error::{Error, Result};
pub use events::{Fixation, SegmenterConfig, SensorFrame, TargetSample};
pub use geometry::{Agent, GazeTarget};
pub use rng::SimRng;
pub use simulator::Scenario;
pub use trace::{Metrics, TraceRecord};

pub type Vec3 = geometry::Vec3<f64>;
pub type GazeRay = geometry::GazeRay<f64>;
pub type SceneObject = geometry::SceneObject<f64>;
pub type AgentPose = geometry::AgentPose<f64>;
pub type Scene = geometry::Scene<f64>;
pub type GeometryConfig = geometry::GeometryConfig<f64>;

pub type Vec3f = geometry::Vec3<f32>;
pub type GazeRayF = geometry::GazeRay<f32>;
pub type SceneF = geometry::Scene<f32>;
pub type GeometryConfigF = geometry::GeometryConfig<f32>;
