//! The bundled study corpus: five germs exercised throughout the tests and
//! the command-line examples. Each is parsed from its own source text, so the
//! corpus also doubles as parser coverage.

use crate::germ::{parse_germ, MapGerm};

/// `(name, source)` pairs for every bundled germ.
pub const SOURCES: &[(&str, &str)] = &[
    ("identity", "vars x y\nx; y\n"),
    ("projection", "vars x y z\nx; y\n"),
    ("square", "vars x y\nx^2 - y^2; 2*x*y\n"),
    ("gstar", "vars x y\n2*x^2 - x^4 + x^2*y; x^3 - x^2\n"),
    ("example1", "vars x y z\nx^2*z + y^3 - z; x\n"),
];

fn get(name: &str) -> MapGerm {
    let (_, src) = SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .expect("corpus germ exists");
    parse_germ(src).expect("corpus germ parses").with_name(name)
}

/// The identity map of the plane.
pub fn identity() -> MapGerm {
    get("identity")
}

/// Projection of 3-space onto the first two coordinates.
pub fn projection() -> MapGerm {
    get("projection")
}

/// Real and imaginary parts of complex squaring.
pub fn square() -> MapGerm {
    get("square")
}

/// A germ whose radial lift degenerates at (1, 0): the canonical lift of the
/// radial field is orthogonal to the point there, so only nonzero second
/// parameter components restore suitability.
pub fn gstar() -> MapGerm {
    get("gstar")
}

/// The cubic-surface study germ `(x^2 z + y^3 - z, x)` on R^3.
pub fn example1() -> MapGerm {
    get("example1")
}

pub fn all() -> Vec<MapGerm> {
    SOURCES.iter().map(|(n, _)| get(n)).collect()
}

/// Narrative attached to radial-ray regularity reports for the cubic-surface
/// germ: the direct tangency computation along the ray (x, 0, 0) yields
/// strictly positive radial margins (the canonical lift there is (x, 0, 0)
/// with <u, p> = x^2), while external classifications describe this germ as
/// not d-regular via a separate matrix-rank test. Both observations are
/// recorded; the report asserts neither.
pub const EXAMPLE1_DREG_NOTE: &str = "direct tangency criterion along the ray (x,0,0) gives \
radial margin <u0,p>/||p||^2 = 1 (transverse) at every sampled point; external classifications \
of this germ as not d-regular rest on a different matrix-rank test that is not part of this \
tool, so the discrepancy is reported here without adjudication";
