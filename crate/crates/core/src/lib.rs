//! Learning polymatrix graphical games from behavioral data.
//!
//! Only joint actions are observed, never payoffs, so the identifiable
//! object is the pure-strategy Nash equilibrium (PSNE) set of a game. The
//! crate provides exact PSNE enumeration, the PSNE/non-PSNE mixture model
//! over joint actions, exact maximum-likelihood recovery over families of
//! candidate PSNE sets, closed-form sample-complexity calculators, and
//! seeded Monte Carlo harnesses that check them.

pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod game;
pub mod hard_instances;
pub mod io;
pub mod linear;
pub mod mixture;
pub mod psne_set;
pub mod space;
pub mod theory;

pub use error::{Error, Result};
pub use game::{embed_binary_weight_game, GameFile, PolymatrixGame};
pub use linear::LinearPsneForm;
pub use mixture::{Dataset, MixtureInterval, MixtureModel};
pub use psne_set::PsneSet;
pub use space::{ActionSpace, JointAction};
