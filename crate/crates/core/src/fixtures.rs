//! Hand-built rooms shared by unit tests.

/// 12x10, all-E border, a horizontal and a vertical door, an A-majority
/// interior with a B pattern patch, a 3-cell water pool and a one-row wall.
pub(crate) const PASSING_ROOM: &str = "\
EEEEJAAJEEEE
EAAAAAAAAAAE
EAAAAAAABBAE
JAAAAAAAAAAE
AAAAAAAAAAAE
JAAAAAAAAAAE
EAFFAAEEEEEE
EAFAAAAAAAAE
EAAAAAAAAAAE
EEEEEEEEEEEE
";
