pub mod align;
pub mod metrics;
pub mod pairs;
pub mod plot;
pub mod run;
pub mod score;
pub mod stats;
