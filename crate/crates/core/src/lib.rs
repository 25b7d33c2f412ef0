//! Core library for `cape`, a harness that administers Likert-style
//! personality inventories to chat-model backends and quantifies how
//! consistent the responses are across repeated, perturbed runs.
//!
//! The pipeline: [`inventory`] loads items and sidecar files, [`prompt`]
//! renders questions and parses replies, [`backend`] talks to live or
//! scripted respondents, [`session`] orchestrates one assessment into a
//! transcript, [`scoring`] turns transcripts into scoring trajectories and
//! OCEAN vectors, and [`metrics`] / [`gp`] / [`stats`] quantify consistency
//! over sets of runs.

pub mod backend;
pub mod exec;
pub mod gp;
pub mod inventory;
pub mod metrics;
pub mod prompt;
pub mod scoring;
pub mod session;
pub mod stats;
