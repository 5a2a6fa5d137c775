//! Small hand-built instances shared by tests, docs and the CLI examples.

use crate::model::{ConnectivityMatrix, StatusMatrix};

/// Four-device line network R1—R2—R3—R4 with link reception probabilities
/// 0.84, 0.75 and 0.91. The running example used throughout the test suite.
pub fn line_scm() -> ConnectivityMatrix {
    ConnectivityMatrix::from_rows(vec![
        vec![1.0, 0.84, 0.0, 0.0],
        vec![0.84, 1.0, 0.75, 0.0],
        vec![0.0, 0.75, 1.0, 0.91],
        vec![0.0, 0.0, 0.91, 1.0],
    ])
    .expect("line fixture is valid")
}

/// Reception status paired with [`line_scm`]: four devices, three packets,
/// entry 1 marks a missing packet.
pub fn line_status() -> StatusMatrix {
    StatusMatrix::from_rows(vec![
        vec![1, 1, 0],
        vec![0, 1, 1],
        vec![0, 0, 1],
        vec![1, 0, 1],
    ])
    .expect("line status fixture is valid")
}

/// Fully connected network with a common off-diagonal reception probability.
pub fn full_mesh(m: usize, p: f64) -> ConnectivityMatrix {
    let mut y = vec![p; m * m];
    for i in 0..m {
        y[i * m + i] = 1.0;
    }
    ConnectivityMatrix::new(m, y).expect("mesh fixture is valid")
}
