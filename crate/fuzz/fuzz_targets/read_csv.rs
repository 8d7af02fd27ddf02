#![no_main]

use libfuzzer_sys::fuzz_target;
use lks_core::fieldio::read_csv;
use lks_core::grid::Grid;

fuzz_target!(|data: &[u8]| {
    // First byte picks the grid so both 1-D and 2-D layouts are exercised.
    let Some((&sel, rest)) = data.split_first() else { return };
    let grid = match sel % 3 {
        0 => Grid::cube(1, 1.0, 8).unwrap(),
        1 => Grid::periodic(&[1.0, 2.0], &[4, 4]).unwrap(),
        _ => Grid::dirichlet(1.0, 6).unwrap(),
    };
    if let Ok(f) = read_csv(rest, &grid, 0.0) {
        assert_eq!(f.values.len(), grid.len());
    }
});
