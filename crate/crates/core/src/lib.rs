//! Geometry-aware push-grasp synergy at desk scale.
//!
//! A planar cluttered-scene simulator generates labeled data, two point-set
//! classifiers score grasp feasibility and push effectiveness, and a policy
//! loop chains pushes and grasps to extract a target object from clutter.

pub mod datagen;
pub mod geom;
pub mod nets;
pub mod candidates;
pub mod sim;
pub mod policy;
pub mod scoring;
pub mod states;


