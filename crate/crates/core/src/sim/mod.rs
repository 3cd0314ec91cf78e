//! Seismic response simulation: synthetic ground motions, bilinear shear
//! buildings and campaign archives.

mod archive;
mod building;
mod integrate;
mod motion;

pub use archive::{run_campaign, Archive, ArchiveManifest, CampaignConfig, RecordEntry, ARCHIVE_FORMAT};
pub use building::{BuildingSpec, ShearModel, DEFAULT_STORY_HEIGHT};
pub use integrate::{simulate_response, AxisHistory, Biaxial, InitialState, ResponseRecord, MAX_DT};
pub use motion::{scale_motion, synthesize_motion, GroundMotion, SpectralParams};
