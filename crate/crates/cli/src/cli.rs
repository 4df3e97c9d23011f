use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "blowup", version, about = "Concentration and isoperimetric exponents of finite product spaces")]
pub struct Cli {
    /// Problem file (TOML).
    #[arg(long, global = true)]
    pub problem: Option<PathBuf>,
    /// Directory receiving the CSV files and `manifest.toml`.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Seed for every random choice; overrides `search.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// KL, TV, Rényi-0 and transport cost between P_X and a second law.
    Divergence {
        /// Second law as a comma list (default: P_Y).
        #[arg(long)]
        q: Option<String>,
    },
    /// Optimal coupling of P_X and P_Y with its potentials.
    Ot,
    /// Primal exponents.
    #[command(subcommand)]
    Exponent(ExponentCmd),
    /// Lower convex envelope of a curve CSV.
    Envelope(EnvelopeArgs),
    /// Dual formulas and certificates.
    #[command(subcommand)]
    Dual(DualCmd),
    /// Exhaustive finite-n ground truth.
    #[command(subcommand)]
    Bruteforce(BruteCmd),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Grids {
    /// `start:stop:step` (inclusive) or a comma list.
    #[arg(long, default_value = "0:1:0.125")]
    pub alpha_grid: String,
    #[arg(long, default_value = "0:0.5:0.05")]
    pub tau_grid: String,
}

#[derive(Debug, Clone, Args)]
pub struct TauGrid {
    #[arg(long, default_value = "0:0.5:0.05")]
    pub tau_grid: String,
}

#[derive(Debug, Subcommand)]
pub enum ExponentCmd {
    /// φ(α, τ) on a grid (`--closed` for φ_≥).
    Phi {
        #[command(flatten)]
        grids: Grids,
        #[arg(long)]
        closed: bool,
    },
    /// φ(τ) = φ(0, τ) with Q_X = P_X.
    Varphi(TauGrid),
    /// φ_X(τ) on the square cost.
    VarphiX(TauGrid),
    /// κ_X(α).
    Kappa {
        #[arg(long, default_value = "0:1:0.125")]
        alpha_grid: String,
    },
    /// φ_λ,≥(τ).
    PhiLambda {
        #[arg(long, default_value = "0:1:0.25")]
        lambda_grid: String,
        #[command(flatten)]
        tau: TauGrid,
    },
    /// ψ(α, τ), a certified lower estimate.
    Psi(Grids),
}

#[derive(Debug, Clone, Args)]
pub struct EnvelopeArgs {
    /// Curve CSV (`alpha,tau,value,method`).
    #[arg(long)]
    pub input: PathBuf,
    /// Query grid in α (default: the curve's own).
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// Query grid in τ (default: the curve's own).
    #[arg(long)]
    pub tau_grid: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum DualCmd {
    /// Dual of φ_≥ with certificate.
    Phi(Grids),
    /// Dual of φ(τ).
    Varphi(TauGrid),
    /// Vertex dual of φ_X(τ) over 1-Lipschitz functions (metric costs).
    VarphiX(TauGrid),
    /// r(τ), the Legendre transform of L_G (metric costs).
    AbsR(TauGrid),
    /// Two-row dual of ψ, seeded with the primal potentials.
    Psi(Grids),
    /// φ̆_X against r on a refined τ grid (metric costs).
    Equiv {
        #[command(flatten)]
        tau: TauGrid,
        /// Bisection rounds near hull tangent points.
        #[arg(long, default_value_t = 20)]
        rounds: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Sample {
    /// Random subsets drawn beyond exhaustive scale.
    #[arg(long, default_value_t = 100_000)]
    pub subsets: usize,
}

#[derive(Debug, Subcommand)]
pub enum BruteCmd {
    /// Γ⁽ⁿ⁾(a, t) with E₀, E₁ (exhaustive, or over exchangeable sets).
    Gamma {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "0:0.5:0.125")]
        alpha_grid: String,
        /// Integer-valued or real `t` grid (additive cost).
        #[arg(long, default_value = "0:1:1")]
        t_grid: String,
        #[arg(long)]
        exchangeable: bool,
        #[command(flatten)]
        sample: Sample,
    },
    /// Product-form bound against the envelopes of φ_λ,≥, per λ.
    Talagrand {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "0:1:0.05")]
        lambda_grid: String,
        #[command(flatten)]
        sample: Sample,
    },
    /// E₁ ≥ φ̆(α_A, t/n) over all subsets, per t.
    DimensionFree {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[command(flatten)]
        sample: Sample,
    },
    /// Coupling LP against the subset supremum.
    Strassen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "0:1:1")]
        t_grid: String,
    },
    /// Γ over Hamming-weight bands (binary, Hamming, P_X = P_Y).
    Levels {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long, default_value = "0:1:1")]
        t_grid: String,
    },
    /// E₁⁽ⁿ⁾ at t = nτ against r(τ) (binary, Hamming, P_X = P_Y).
    Convergence {
        #[arg(long, default_value = "4,16,64,256,1024")]
        n_list: String,
        #[arg(long, default_value_t = 0.25)]
        tau: f64,
        #[arg(long, default_value_t = 0.5)]
        a: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Criteria to run (comma list of ids; default all).
    #[arg(long)]
    pub only: Option<String>,
    /// Directory of problem files to smoke-test alongside the criteria.
    #[arg(long, default_value = "problems")]
    pub problems_dir: PathBuf,
}
