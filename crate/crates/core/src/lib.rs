//! Boundary blow-up rates of large solutions of `Δu = f(u)` on the unit ball.

pub mod config;
pub mod expansion;
pub mod expr;
pub mod nonlinearity;
pub mod numerics;
pub mod ode;
pub mod phase_plane;
pub mod picard;
pub mod series;
pub mod universality;
