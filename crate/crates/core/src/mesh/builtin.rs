//! Built-in initial meshes.

use super::{parse_mesh, Mesh};
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: [&str; 3] = ["square2", "square4", "lshape6"];

const SQUARE2: &str = "\
v 0 0
v 1 0
v 1 1
v 0 1
t 0 1 2
t 0 2 3
";

// Criss-cross square with a center vertex; refinement edges on the boundary.
const SQUARE4: &str = "\
v 0 0
v 1 0
v 1 1
v 0 1
v 0.5 0.5
t 0 1 4
t 1 2 4
t 2 3 4
t 3 0 4
";

// (-1,1)² without the lower-right quadrant; diagonals meet at the reentrant corner.
const LSHAPE6: &str = "\
v -1 -1
v 0 -1
v 0 0
v 1 0
v 1 1
v 0 1
v -1 1
v -1 0
t 0 1 2
t 0 2 7
t 7 2 6
t 2 5 6
t 2 3 4
t 2 4 5
";

/// Level-0 mesh by name: `square2`, `square4` (unit square) or `lshape6`.
pub fn builtin(name: &str) -> Result<Mesh> {
    let text = match name {
        "square2" => SQUARE2,
        "square4" => SQUARE4,
        "lshape6" => LSHAPE6,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown builtin mesh `{other}` (expected one of {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    parse_mesh(text)
}
