//! Names of the sampled checks, shared by the corpus and front ends.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKind {
    RiemannFlat,
    LeviCivitaConsistency,
    NonsingularPencil,
    AlmostCompatible,
    CompatibleMetrics,
    Ferapontov,
    BracketPencil,
    HamiltonianAffinor,
    StructuralFlow,
    TsarevRelation,
    SemiHamiltonian,
    HolonomicDiagonal,
    Diagonalizable,
    SimultaneousDiagonal,
    FrobeniusIntegrability,
    RiemannInvariants2d,
}

impl CheckKind {
    pub const ALL: [CheckKind; 16] = [
        CheckKind::RiemannFlat,
        CheckKind::LeviCivitaConsistency,
        CheckKind::NonsingularPencil,
        CheckKind::AlmostCompatible,
        CheckKind::CompatibleMetrics,
        CheckKind::Ferapontov,
        CheckKind::BracketPencil,
        CheckKind::HamiltonianAffinor,
        CheckKind::StructuralFlow,
        CheckKind::TsarevRelation,
        CheckKind::SemiHamiltonian,
        CheckKind::HolonomicDiagonal,
        CheckKind::Diagonalizable,
        CheckKind::SimultaneousDiagonal,
        CheckKind::FrobeniusIntegrability,
        CheckKind::RiemannInvariants2d,
    ];

    /// Kebab-case name used on the command line and in definition files.
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::RiemannFlat => "riemann-flat",
            CheckKind::LeviCivitaConsistency => "levi-civita-consistency",
            CheckKind::NonsingularPencil => "nonsingular-pencil",
            CheckKind::AlmostCompatible => "almost-compatible",
            CheckKind::CompatibleMetrics => "compatible-metrics",
            CheckKind::Ferapontov => "ferapontov",
            CheckKind::BracketPencil => "bracket-pencil",
            CheckKind::HamiltonianAffinor => "hamiltonian-affinor",
            CheckKind::StructuralFlow => "structural-flow",
            CheckKind::TsarevRelation => "tsarev-relation",
            CheckKind::SemiHamiltonian => "semi-hamiltonian",
            CheckKind::HolonomicDiagonal => "holonomic-diagonal",
            CheckKind::Diagonalizable => "diagonalizable",
            CheckKind::SimultaneousDiagonal => "simultaneous-diagonal",
            CheckKind::FrobeniusIntegrability => "frobenius-integrability",
            CheckKind::RiemannInvariants2d => "riemann-invariants-2d",
        }
    }

    /// The library function that performs the check.
    pub fn operation(self) -> &'static str {
        match self {
            CheckKind::RiemannFlat => "criteria::check_riemann_flat",
            CheckKind::LeviCivitaConsistency => "criteria::check_levi_civita_consistency",
            CheckKind::NonsingularPencil => "criteria::check_nonsingular",
            CheckKind::AlmostCompatible => "criteria::check_almost_compatible",
            CheckKind::CompatibleMetrics => "criteria::check_compatible",
            CheckKind::Ferapontov => "criteria::check_ferapontov",
            CheckKind::BracketPencil => "criteria::check_bracket_pair_compatibility",
            CheckKind::HamiltonianAffinor => "criteria::check_hamiltonian_affinor",
            CheckKind::StructuralFlow => "criteria::check_structural_flow_integrability",
            CheckKind::TsarevRelation => "criteria::check_tsarev_relation",
            CheckKind::SemiHamiltonian => "criteria::check_semihamiltonian",
            CheckKind::HolonomicDiagonal => "criteria::check_holonomic_diagonal_structure",
            CheckKind::Diagonalizable => "diag::check_diagonalizable",
            CheckKind::SimultaneousDiagonal => "diag::check_simultaneous_diagonalization",
            CheckKind::FrobeniusIntegrability => "diag::frobenius_integrability_check",
            CheckKind::RiemannInvariants2d => "diag::check_riemann_invariants_2d",
        }
    }
}

/// Every check operation exported by [`crate::criteria`] and [`crate::diag`].
pub const CHECK_OPERATIONS: [&str; 16] = [
    "criteria::check_riemann_flat",
    "criteria::check_levi_civita_consistency",
    "criteria::check_nonsingular",
    "criteria::check_almost_compatible",
    "criteria::check_compatible",
    "criteria::check_ferapontov",
    "criteria::check_bracket_pair_compatibility",
    "criteria::check_hamiltonian_affinor",
    "criteria::check_structural_flow_integrability",
    "criteria::check_tsarev_relation",
    "criteria::check_semihamiltonian",
    "criteria::check_holonomic_diagonal_structure",
    "diag::check_diagonalizable",
    "diag::check_simultaneous_diagonalization",
    "diag::frobenius_integrability_check",
    "diag::check_riemann_invariants_2d",
];

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        CheckKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown check `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in CheckKind::ALL {
            assert_eq!(k.name().parse::<CheckKind>().unwrap(), k);
        }
        assert!("nope".parse::<CheckKind>().is_err());
    }
}
