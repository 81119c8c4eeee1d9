//! Simultaneous-move resolution shared by the grid scenarios.

pub type Cell = (i32, i32);

pub const NOOP: usize = 0;
pub const UP: usize = 1;
pub const DOWN: usize = 2;
pub const RIGHT: usize = 3;
pub const LEFT: usize = 4;
pub const ACTION_NAMES: [&str; 5] = ["noop", "up", "down", "right", "left"];

pub fn delta(action: usize) -> Cell {
    match action {
        UP => (0, 1),
        DOWN => (0, -1),
        RIGHT => (1, 0),
        LEFT => (-1, 0),
        _ => (0, 0),
    }
}

pub fn manhattan(a: Cell, b: Cell) -> i32 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

/// Moves every robot at once.
///
/// A move is cancelled when its destination is blocked (outside the grid or a
/// wall), currently occupied by another robot, or also chosen by another robot.
/// Occupied cells stay blocked even if their occupant leaves, so swaps and
/// follow-the-leader chains are cancelled too.
pub fn resolve_moves(positions: &[Cell], actions: &[usize], blocked: impl Fn(Cell) -> bool) -> Vec<Cell> {
    let proposed: Vec<Cell> = positions
        .iter()
        .zip(actions)
        .map(|(&p, &a)| {
            let d = delta(a);
            let q = (p.0 + d.0, p.1 + d.1);
            if blocked(q) {
                p
            } else {
                q
            }
        })
        .collect();
    proposed
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let p = positions[i];
            if q == p {
                return p;
            }
            let conflict = positions
                .iter()
                .enumerate()
                .any(|(j, &other)| j != i && (other == q || proposed[j] == q));
            if conflict {
                p
            } else {
                q
            }
        })
        .collect()
}

pub fn cell_at(features: &[f64], offset: usize) -> Cell {
    (features[offset].round() as i32, features[offset + 1].round() as i32)
}
