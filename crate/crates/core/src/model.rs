//! Network and session state: connectivity, reception status, importance
//! weights, deadline accounting, and the derived device/packet sets that
//! every other module queries.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} matrix entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("connectivity matrix asymmetric at ({i},{k}): {a} vs {b}")]
    Asymmetric { i: usize, k: usize, a: f64, b: f64 },
    #[error("connectivity matrix diagonal entry for device {0} must be 1")]
    BadDiagonal(usize),
    #[error("entry ({i},{k}) = {value} outside [0,1]")]
    ProbabilityOutOfRange { i: usize, k: usize, value: f64 },
    #[error("status entry ({k},{l}) must be 0 or 1, got {got}")]
    NotBinary { k: usize, l: usize, got: u8 },
    #[error("packet {0} is missing at every device")]
    UncoveredPacket(PacketId),
    #[error("device index {index} out of range for {count} devices")]
    DeviceOutOfRange { index: usize, count: usize },
    #[error("packet index {index} out of range for {count} packets")]
    PacketOutOfRange { index: usize, count: usize },
    #[error("device {0} has no neighbors")]
    IsolatedDevice(DeviceId),
    #[error("importance entry ({k},{l}) = {value} must be finite and nonnegative")]
    BadImportance { k: usize, l: usize, value: f64 },
    #[error("slot {t} outside horizon 1..={theta}")]
    SlotOutOfRange { t: u32, theta: u32 },
}

/// Zero-based device index. Displays one-based as `R1`, `R2`, ...
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub usize);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0 + 1)
    }
}

/// Zero-based packet index. Displays one-based as `P1`, `P2`, ...
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PacketId(pub usize);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0 + 1)
    }
}

/// Symmetric M×M matrix of packet reception probabilities. An entry of 0
/// means the pair is not directly connected; the diagonal is fixed at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConnectivityRepr", into = "ConnectivityRepr")]
pub struct ConnectivityMatrix {
    m: usize,
    y: Vec<f64>,
}

/// Serialized form: device count plus the row-major probability array.
#[derive(Serialize, Deserialize)]
struct ConnectivityRepr {
    m: usize,
    y: Vec<f64>,
}

impl From<ConnectivityMatrix> for ConnectivityRepr {
    fn from(v: ConnectivityMatrix) -> Self {
        ConnectivityRepr { m: v.m, y: v.y }
    }
}

impl TryFrom<ConnectivityRepr> for ConnectivityMatrix {
    type Error = ModelError;
    fn try_from(r: ConnectivityRepr) -> Result<Self, ModelError> {
        ConnectivityMatrix::new(r.m, r.y)
    }
}

impl ConnectivityMatrix {
    /// Builds and validates a matrix from a row-major entry vector.
    pub fn new(m: usize, y: Vec<f64>) -> Result<Self, ModelError> {
        if y.len() != m * m {
            return Err(ModelError::DimensionMismatch {
                expected: m * m,
                got: y.len(),
            });
        }
        for i in 0..m {
            for k in 0..m {
                let v = y[i * m + k];
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(ModelError::ProbabilityOutOfRange { i, k, value: v });
                }
                if k < i && (y[i * m + k] - y[k * m + i]).abs() > 0.0 {
                    return Err(ModelError::Asymmetric {
                        i,
                        k,
                        a: y[i * m + k],
                        b: y[k * m + i],
                    });
                }
            }
            if y[i * m + i] != 1.0 {
                return Err(ModelError::BadDiagonal(i));
            }
        }
        Ok(ConnectivityMatrix { m, y })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let m = rows.len();
        Self::new(m, rows.into_iter().flatten().collect())
    }

    pub fn device_count(&self) -> usize {
        self.m
    }

    pub fn devices(&self) -> impl Iterator<Item = DeviceId> {
        (0..self.m).map(DeviceId)
    }

    /// Packet reception probability of the link between `i` and `k`
    /// (0 when not directly connected, 1 on the diagonal).
    pub fn reception(&self, i: DeviceId, k: DeviceId) -> f64 {
        self.y[i.0 * self.m + k.0]
    }

    /// Erasure probability of a direct link; only meaningful when
    /// `connected(i, k)` holds.
    pub fn erasure(&self, i: DeviceId, k: DeviceId) -> f64 {
        1.0 - self.reception(i, k)
    }

    pub fn connected(&self, i: DeviceId, k: DeviceId) -> bool {
        self.reception(i, k) != 0.0
    }

    /// Coverage zone of `i`: every device with a nonzero entry, which
    /// includes `i` itself through the unit diagonal.
    pub fn coverage_zone(&self, i: DeviceId) -> Vec<DeviceId> {
        self.devices().filter(|&k| self.connected(i, k)).collect()
    }

    /// Directly connected devices, excluding `i` itself.
    pub fn neighbors(&self, i: DeviceId) -> Vec<DeviceId> {
        self.devices()
            .filter(|&k| k != i && self.connected(i, k))
            .collect()
    }

    /// Mean erasure probability over the links connecting `k` to its
    /// neighbors. Errors for an isolated device.
    pub fn average_erasure(&self, k: DeviceId) -> Result<f64, ModelError> {
        let nbrs = self.neighbors(k);
        if nbrs.is_empty() {
            return Err(ModelError::IsolatedDevice(k));
        }
        let sum: f64 = nbrs.iter().map(|&i| self.erasure(i, k)).sum();
        Ok(sum / nbrs.len() as f64)
    }

    /// Average connectivity index ȳ = Σ y_{i,k} / M², summed over all
    /// entries including the unit diagonal. This is the literal definition;
    /// see [`ConnectivityMatrix::off_diagonal_mean`] for the companion
    /// reading without the diagonal contribution.
    pub fn connectivity_index(&self) -> f64 {
        self.y.iter().sum::<f64>() / (self.m * self.m) as f64
    }

    /// Mean of the M(M−1) off-diagonal entries (absent links count as 0).
    pub fn off_diagonal_mean(&self) -> f64 {
        if self.m < 2 {
            return 0.0;
        }
        let total: f64 = self.y.iter().sum::<f64>() - self.m as f64;
        total / (self.m * (self.m - 1)) as f64
    }
}

/// M×N binary reception matrix: entry 1 means the packet is missing at the
/// device. At least one device holds each packet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "StatusRepr", into = "StatusRepr")]
pub struct StatusMatrix {
    m: usize,
    n: usize,
    f: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct StatusRepr {
    m: usize,
    n: usize,
    f: Vec<u8>,
}

impl From<StatusMatrix> for StatusRepr {
    fn from(v: StatusMatrix) -> Self {
        StatusRepr {
            m: v.m,
            n: v.n,
            f: v.f,
        }
    }
}

impl TryFrom<StatusRepr> for StatusMatrix {
    type Error = ModelError;
    fn try_from(r: StatusRepr) -> Result<Self, ModelError> {
        StatusMatrix::new(r.m, r.n, r.f)
    }
}

impl StatusMatrix {
    pub fn new(m: usize, n: usize, f: Vec<u8>) -> Result<Self, ModelError> {
        if f.len() != m * n {
            return Err(ModelError::DimensionMismatch {
                expected: m * n,
                got: f.len(),
            });
        }
        for k in 0..m {
            for l in 0..n {
                let v = f[k * n + l];
                if v > 1 {
                    return Err(ModelError::NotBinary { k, l, got: v });
                }
            }
        }
        for l in 0..n {
            if (0..m).all(|k| f[k * n + l] == 1) {
                return Err(ModelError::UncoveredPacket(PacketId(l)));
            }
        }
        Ok(StatusMatrix { m, n, f })
    }

    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self, ModelError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        Self::new(m, n, rows.into_iter().flatten().collect())
    }

    pub fn device_count(&self) -> usize {
        self.m
    }

    pub fn packet_count(&self) -> usize {
        self.n
    }

    pub fn devices(&self) -> impl Iterator<Item = DeviceId> {
        (0..self.m).map(DeviceId)
    }

    pub fn is_missing(&self, k: DeviceId, l: PacketId) -> bool {
        self.f[k.0 * self.n + l.0] == 1
    }

    pub fn has(&self, k: DeviceId, l: PacketId) -> bool {
        !self.is_missing(k, l)
    }

    /// Packets successfully received by device `k`.
    pub fn has_set(&self, k: DeviceId) -> Vec<PacketId> {
        (0..self.n)
            .map(PacketId)
            .filter(|&l| self.has(k, l))
            .collect()
    }

    /// Packets missing at device `k`; the complement of `has_set`.
    pub fn wants_set(&self, k: DeviceId) -> Vec<PacketId> {
        (0..self.n)
            .map(PacketId)
            .filter(|&l| self.is_missing(k, l))
            .collect()
    }

    pub fn wants_count(&self, k: DeviceId) -> usize {
        self.row(k).iter().filter(|&&v| v == 1).count()
    }

    /// Devices with a nonempty Wants set.
    pub fn devices_with_wants(&self) -> Vec<DeviceId> {
        self.devices()
            .filter(|&k| self.wants_count(k) > 0)
            .collect()
    }

    /// True once no device misses any packet.
    pub fn complete(&self) -> bool {
        self.f.iter().all(|&v| v == 0)
    }

    /// New matrix with packet `l` marked received at device `k`.
    pub fn mark_received(&self, k: DeviceId, l: PacketId) -> StatusMatrix {
        let mut next = self.clone();
        next.f[k.0 * self.n + l.0] = 0;
        next
    }

    pub fn row(&self, k: DeviceId) -> &[u8] {
        &self.f[k.0 * self.n..(k.0 + 1) * self.n]
    }
}

/// Deadline clock: total slot budget Θ and the current slot t ∈ [1, Θ].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionClock {
    theta: u32,
    t: u32,
}

impl SessionClock {
    pub fn new(theta: u32, t: u32) -> Result<Self, ModelError> {
        if t < 1 || t > theta {
            return Err(ModelError::SlotOutOfRange { t, theta });
        }
        Ok(SessionClock { theta, t })
    }

    pub fn theta(&self) -> u32 {
        self.theta
    }

    pub fn slot(&self) -> u32 {
        self.t
    }

    /// Remaining slots Q = Θ − t + 1, counting the current slot.
    pub fn remaining(&self) -> u32 {
        self.theta - self.t + 1
    }
}

/// M×N matrix of nonnegative per-packet distortion weights δ_{k,l}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ImportanceRepr", into = "ImportanceRepr")]
pub struct ImportanceMatrix {
    m: usize,
    n: usize,
    delta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ImportanceRepr {
    m: usize,
    n: usize,
    delta: Vec<f64>,
}

impl From<ImportanceMatrix> for ImportanceRepr {
    fn from(v: ImportanceMatrix) -> Self {
        ImportanceRepr {
            m: v.m,
            n: v.n,
            delta: v.delta,
        }
    }
}

impl TryFrom<ImportanceRepr> for ImportanceMatrix {
    type Error = ModelError;
    fn try_from(r: ImportanceRepr) -> Result<Self, ModelError> {
        ImportanceMatrix::new(r.m, r.n, r.delta)
    }
}

impl ImportanceMatrix {
    pub fn new(m: usize, n: usize, delta: Vec<f64>) -> Result<Self, ModelError> {
        if delta.len() != m * n {
            return Err(ModelError::DimensionMismatch {
                expected: m * n,
                got: delta.len(),
            });
        }
        for k in 0..m {
            for l in 0..n {
                let v = delta[k * n + l];
                if !v.is_finite() || v < 0.0 {
                    return Err(ModelError::BadImportance { k, l, value: v });
                }
            }
        }
        Ok(ImportanceMatrix { m, n, delta })
    }

    /// Same weight for every device and packet.
    pub fn uniform(m: usize, n: usize, value: f64) -> Self {
        ImportanceMatrix::new(m, n, vec![value; m * n]).expect("uniform weight must be valid")
    }

    /// Replicates a per-packet weight vector across all devices.
    pub fn per_packet(m: usize, weights: &[f64]) -> Result<Self, ModelError> {
        let n = weights.len();
        let mut delta = Vec::with_capacity(m * n);
        for _ in 0..m {
            delta.extend_from_slice(weights);
        }
        ImportanceMatrix::new(m, n, delta)
    }

    pub fn device_count(&self) -> usize {
        self.m
    }

    pub fn packet_count(&self) -> usize {
        self.n
    }

    pub fn value(&self, k: DeviceId, l: PacketId) -> f64 {
        self.delta[k.0 * self.n + l.0]
    }
}

/// Devices whose missing-packet count is at least the remaining slot budget.
/// Only devices with a nonempty Wants set are classified.
pub fn critical_set(f: &StatusMatrix, clock: &SessionClock) -> Vec<DeviceId> {
    let q = clock.remaining() as usize;
    f.devices()
        .filter(|&k| {
            let w = f.wants_count(k);
            w > 0 && w >= q
        })
        .collect()
}

/// Devices with a nonempty Wants set smaller than the remaining slot budget.
pub fn non_critical_set(f: &StatusMatrix, clock: &SessionClock) -> Vec<DeviceId> {
    let q = clock.remaining() as usize;
    f.devices()
        .filter(|&k| {
            let w = f.wants_count(k);
            w > 0 && w < q
        })
        .collect()
}

/// Additive individual distortion of device `k`: the sum of importance
/// weights over its missing packets.
pub fn individual_distortion(f: &StatusMatrix, delta: &ImportanceMatrix, k: DeviceId) -> f64 {
    f.wants_set(k).iter().map(|&l| delta.value(k, l)).sum()
}
