//! Stationary phase-plane census and long-time audits for the scalar
//! reaction-diffusion equation `u_t = u_xx + f(u)` on a truncated line.

pub mod asymptotics;
pub mod nonlinearity;
pub mod output;
pub mod pde;
pub mod phase_plane;
mod quadrature;
pub mod scenario;
pub mod sturm;
