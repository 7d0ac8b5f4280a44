pub mod approx;
pub mod ball;
pub mod certify;
pub mod error;
pub mod ops;
pub mod report;
pub mod rounded;

pub use ball::{Disc, FunctionBall};
pub use error::{Error, Result};
pub use rounded::{Interval, Rectangle, RoundingContext};
