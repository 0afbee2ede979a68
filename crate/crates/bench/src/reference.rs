//! Published reference numbers, reported next to measured values in a
//! column labelled `published`.

use hpdg::basis::BasisKind;
use hpdg::localops::AccessAlgorithm;
use hpdg::multigrid::Criterion;
use hpdg::problems::ProblemKind;

/// Mesh levels of the cycle-count tables (9x9 to 243x243).
pub const CYCLE_LEVELS: [u32; 4] = [2, 3, 4, 5];
/// Polynomial degrees of the cycle-count tables.
pub const CYCLE_DEGREES: [usize; 5] = [2, 3, 4, 5, 6];

type CycleTable = [[Option<u32>; 5]; 4];

const fn row(v: [u32; 5]) -> [Option<u32>; 5] {
    [Some(v[0]), Some(v[1]), Some(v[2]), Some(v[3]), Some(v[4])]
}

const fn row4(v: [u32; 4]) -> [Option<u32>; 5] {
    [Some(v[0]), Some(v[1]), Some(v[2]), Some(v[3]), None]
}

const LOBATTO_SIN_UNPREC: CycleTable = [
    row([12, 24, 43, 63, 89]),
    row([13, 23, 41, 61, 86]),
    row([13, 22, 41, 61, 85]),
    row([13, 22, 41, 61, 85]),
];
const LOBATTO_PEAK_UNPREC: CycleTable = [
    row([19, 36, 59, 89, 125]),
    row([18, 33, 55, 82, 116]),
    row([17, 31, 52, 78, 111]),
    row([16, 30, 50, 75, 106]),
];
const LOBATTO_SIN_PREC: CycleTable = [
    row([11, 20, 32, 46, 62]),
    row([9, 15, 25, 35, 47]),
    row([7, 12, 19, 26, 35]),
    row([7, 9, 13, 18, 22]),
];
const LOBATTO_PEAK_PREC: CycleTable = [
    row([16, 27, 43, 61, 82]),
    row([12, 19, 29, 41, 55]),
    row([9, 14, 21, 29, 39]),
    row([8, 10, 15, 20, 26]),
];
const LEGENDRE_PEAK_UNPREC: CycleTable = [
    row([20, 37, 62, 92, 131]),
    row([19, 34, 57, 85, 122]),
    row([18, 33, 55, 82, 117]),
    row4([17, 31, 53, 78]),
];
const LEGENDRE_PEAK_PREC: CycleTable = [
    row([16, 27, 43, 61, 82]),
    row([12, 19, 29, 41, 55]),
    row([9, 13, 21, 29, 38]),
    row4([8, 10, 15, 20]),
];

/// Published multigrid cycle count to a relative reduction of `1e-7`.
pub fn cycle_count(problem: ProblemKind, criterion: Criterion, basis: BasisKind, level: u32, p: usize) -> Option<u32> {
    use BasisKind::*;
    use Criterion::*;
    use ProblemKind::*;
    let table = match (basis, problem, criterion) {
        (GaussLobatto, SinProduct, Unpreconditioned) => &LOBATTO_SIN_UNPREC,
        (GaussLobatto, TwoPeak, Unpreconditioned) => &LOBATTO_PEAK_UNPREC,
        (GaussLobatto, SinProduct, Preconditioned) => &LOBATTO_SIN_PREC,
        (GaussLobatto, TwoPeak, Preconditioned) => &LOBATTO_PEAK_PREC,
        (GaussLegendre, TwoPeak, Unpreconditioned) => &LEGENDRE_PEAK_UNPREC,
        (GaussLegendre, TwoPeak, Preconditioned) => &LEGENDRE_PEAK_PREC,
        _ => return None,
    };
    let r = CYCLE_LEVELS.iter().position(|&l| l == level)?;
    let c = CYCLE_DEGREES.iter().position(|&q| q == p)?;
    table[r][c]
}

/// Published memory accesses per cell, `p = 1..=10`.
pub fn access_counts(alg: AccessAlgorithm, dim: usize) -> Option<[u64; 10]> {
    use AccessAlgorithm::*;
    Some(match (alg, dim) {
        (Vanilla, 2) => [36, 81, 144, 225, 324, 441, 576, 729, 900, 1089],
        (ThreeStage, 2) => [40, 69, 104, 145, 192, 245, 304, 369, 440, 517],
        (ThreeStageStandalone, 2) => [48, 87, 136, 195, 264, 343, 432, 531, 640, 759],
        (Vanilla, 3) => [88, 297, 704, 1375, 2376, 3773, 5632, 8019, 11000, 14641],
        (ThreeStage, 3) => [108, 270, 528, 900, 1404, 2058, 2880, 3888, 5100, 6534],
        (ThreeStageStandalone, 3) => [124, 324, 656, 1150, 1836, 2744, 3904, 5346, 7100, 9196],
        _ => return None,
    })
}
