//! Extended polyhedral risk measures.
//!
//! A risk measure of this class is the optimal value of a two-stage linear
//! program
//!
//! ```text
//! ℛ(Z) = min_{A₁y₁ ≤ a₁}  c₁ᵀy₁ + E[Q(y₁, Z)],
//! Q(y₁, z) = min { c₂ᵀy₂ : A₂y₂ ≤ a₂,  B₂₀y₂ = z·k₂ + k̃₂ − B₂₁y₁ },
//! ```
//!
//! whose second-stage dual is `max_{(λ₁,λ₂)∈D} λ₁ᵀ(z·k₂ + k̃₂ − B₂₁y₁) + λ₂ᵀa₂`
//! over `D = {λ₂ ≤ 0, B₂₀ᵀλ₁ + A₂ᵀλ₂ = c₂}`. Composing `Q` with the loss
//! `g(x, ξ)` of an inner stochastic program yields a risk-neutral problem on
//! the lifted variable `(y₁, x)`, with the subgradient
//! `(c₁ − B₂₁ᵀλ₁ ; (λ₁ᵀk₂)·G(x, ξ))`.

mod lifted;
mod model;

pub use lifted::{eprm_reformulate, LiftedProblem, LinearLoss};
pub use model::{
    cvar_as_eprm, cvar_as_eprm_bounded, expectation_as_eprm, mean_cvar_as_eprm, AssumptionReport, Eprm, EprmDims,
    EprmModel, EprmValue, SecondStage, TieBreak,
};
