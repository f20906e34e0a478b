//! Orientation estimation of a grasped rigid body on SO(3).
//!
//! Two force sensors and a virtual-spring contact model on a superquadric
//! body give haptic residuals; an optional camera gives a rotation
//! measurement. A complementary filter blends both into an angular-rate
//! correction that is integrated with the exact exponential map.
//!
//! ```
//! use haptic_cf::sim::{preset, run, Outcome};
//!
//! let record = run(&preset("case_a").unwrap()).unwrap();
//! assert_eq!(record.summary.outcome, Outcome::Converged);
//! ```

pub mod error;
pub mod filter;
pub mod sensing;
pub mod sim;
pub mod so3;
pub mod superquadric;

pub use error::{FilterError, GeometryError, RecordError, SimError, So3Error};
pub use filter::{FilterGains, FilterState};
pub use so3::{RotationMatrix, Vec3};
pub use superquadric::Superquadric;
