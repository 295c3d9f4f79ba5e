use crate::error::{Error, Result};
use crate::policy::{ControlField, GridField};

/// Continuous control equal to `v` inside `B_{R-δ}`, to `e_d` outside
/// `B_R`, and blended linearly on the shell, with `δ = 2h`.
pub fn epsilon_optimal_control(v: &GridField, radius: f64) -> Result<ControlField> {
    if !(radius > 0.0) || radius > v.a {
        return Err(Error::config(
            "shaping.radius",
            format!(
                "radius must be positive and at most the box half-width {}, got {radius}",
                v.a
            ),
        ));
    }
    Ok(ControlField::Grid(v.clone()).shaped(radius, 2.0 * v.h))
}
