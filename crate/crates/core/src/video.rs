//! Layered GOP packetization and the PSNR quality model.
//!
//! A group of pictures is encoded into `L` ordered layers; layer ℓ decodes
//! only if every packet of layers 1..ℓ arrived. Quality is read from a
//! cumulative PSNR table ᾱ(0..L): ᾱ(0) is the concealment floor when even
//! the base layer is lost, ᾱ(L) the error-free quality. Losing a packet of
//! layer ℓ truncates decoding below ℓ, which yields the per-packet
//! importance weights the schedulers optimize.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DeviceId, ImportanceMatrix, PacketId, StatusMatrix};

#[derive(Debug, Error)]
pub enum VideoError {
    #[error("psnr table must have layers+1 = {expected} entries, got {got}")]
    PsnrTableLength { expected: usize, got: usize },
    #[error("psnr table must be strictly increasing at index {0}")]
    PsnrTableNotIncreasing(usize),
    #[error("packets_per_layer must be nonempty with positive entries")]
    BadLayerCounts,
    #[error("layer {0} has zero bytes")]
    EmptyLayer(usize),
    #[error("payload size must be positive")]
    BadPayload,
    #[error("status matrix has {got} packets but the GOP model has {expected}")]
    PacketCountMismatch { expected: usize, got: usize },
    #[error("failed to read GOP model: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse GOP model: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Layered packetization of one GOP plus its cumulative PSNR table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GopRepr", into = "GopRepr")]
pub struct GopModel {
    packets_per_layer: Vec<usize>,
    psnr_table: Vec<f64>,
    rate: Option<f64>,
    /// Layer index (1-based) of each packet, derived from the layer counts.
    layer_of: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GopRepr {
    layers: usize,
    packets_per_layer: Vec<usize>,
    psnr_table: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
}

impl From<GopModel> for GopRepr {
    fn from(g: GopModel) -> Self {
        GopRepr {
            layers: g.packets_per_layer.len(),
            packets_per_layer: g.packets_per_layer,
            psnr_table: g.psnr_table,
            rate: g.rate,
        }
    }
}

impl TryFrom<GopRepr> for GopModel {
    type Error = VideoError;
    fn try_from(r: GopRepr) -> Result<Self, VideoError> {
        if r.layers != r.packets_per_layer.len() {
            return Err(VideoError::BadLayerCounts);
        }
        GopModel::new(r.packets_per_layer, r.psnr_table, r.rate)
    }
}

impl GopModel {
    pub fn new(
        packets_per_layer: Vec<usize>,
        psnr_table: Vec<f64>,
        rate: Option<f64>,
    ) -> Result<Self, VideoError> {
        if packets_per_layer.is_empty() || packets_per_layer.iter().any(|&c| c == 0) {
            return Err(VideoError::BadLayerCounts);
        }
        let layers = packets_per_layer.len();
        if psnr_table.len() != layers + 1 {
            return Err(VideoError::PsnrTableLength {
                expected: layers + 1,
                got: psnr_table.len(),
            });
        }
        for i in 1..psnr_table.len() {
            if psnr_table[i] <= psnr_table[i - 1] {
                return Err(VideoError::PsnrTableNotIncreasing(i));
            }
        }
        let mut layer_of = Vec::new();
        for (idx, &count) in packets_per_layer.iter().enumerate() {
            layer_of.extend(std::iter::repeat(idx + 1).take(count));
        }
        Ok(GopModel {
            packets_per_layer,
            psnr_table,
            rate,
            layer_of,
        })
    }

    /// Four layers of 8/3/3/3 packets (17 in total) with a synthetic PSNR
    /// table topping out at the error-free 35.64 dB; the lower entries are
    /// placeholder concealment values, configurable via [`GopModel::new`].
    pub fn default_four_layer() -> Self {
        GopModel::new(
            vec![8, 3, 3, 3],
            vec![20.0, 28.0, 31.0, 33.5, 35.64],
            None,
        )
        .expect("default GOP model is valid")
    }

    pub fn load(path: &Path) -> Result<Self, VideoError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn layer_count(&self) -> usize {
        self.packets_per_layer.len()
    }

    pub fn packet_count(&self) -> usize {
        self.layer_of.len()
    }

    pub fn packets_per_layer(&self) -> &[usize] {
        &self.packets_per_layer
    }

    /// 1-based layer the packet belongs to.
    pub fn layer_of(&self, l: PacketId) -> usize {
        self.layer_of[l.0]
    }

    /// Cumulative PSNR when the first `layers` layers decode (0 ≤ layers ≤ L).
    pub fn psnr(&self, layers: usize) -> f64 {
        self.psnr_table[layers]
    }

    pub fn rate(&self) -> Option<f64> {
        self.rate
    }

    /// Importance of each packet: the PSNR lost when that packet is missing,
    /// i.e. ᾱ(L) − ᾱ(ℓ−1) for a packet of layer ℓ, since its loss truncates
    /// decoding below ℓ.
    pub fn packet_importance(&self) -> Vec<f64> {
        let full = self.psnr(self.layer_count());
        self.layer_of
            .iter()
            .map(|&layer| full - self.psnr_table[layer - 1])
            .collect()
    }

    /// Per-device importance matrix with the per-packet weights replicated
    /// across all devices.
    pub fn importance_matrix(&self, devices: usize) -> ImportanceMatrix {
        ImportanceMatrix::per_packet(devices, &self.packet_importance())
            .expect("importance weights derived from a valid PSNR table")
    }

    /// Largest ℓ such that all packets of layers 1..ℓ are present.
    pub fn decodable_prefix(&self, has: &[PacketId]) -> usize {
        let mut present = vec![false; self.packet_count()];
        for p in has {
            present[p.0] = true;
        }
        let mut next = 0usize;
        for (layer, &count) in self.packets_per_layer.iter().enumerate() {
            if !present[next..next + count].iter().all(|&p| p) {
                return layer;
            }
            next += count;
        }
        self.layer_count()
    }

    /// Per-device decodable prefixes and PSNR plus the network mean.
    pub fn quality_report(&self, f: &StatusMatrix) -> Result<QualityReport, VideoError> {
        if f.packet_count() != self.packet_count() {
            return Err(VideoError::PacketCountMismatch {
                expected: self.packet_count(),
                got: f.packet_count(),
            });
        }
        let full = self.psnr(self.layer_count());
        let per_device: Vec<DeviceQuality> = f
            .devices()
            .map(|k| {
                let prefix = self.decodable_prefix(&f.has_set(k));
                let psnr = self.psnr(prefix);
                DeviceQuality {
                    device: k,
                    prefix,
                    psnr,
                    residual_distortion: full - psnr,
                }
            })
            .collect();
        let mean_psnr =
            per_device.iter().map(|d| d.psnr).sum::<f64>() / per_device.len().max(1) as f64;
        Ok(QualityReport {
            per_device,
            mean_psnr,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviceQuality {
    pub device: DeviceId,
    /// Number of decodable leading layers ℓ*.
    pub prefix: usize,
    pub psnr: f64,
    /// PSNR shortfall against the error-free table entry.
    pub residual_distortion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QualityReport {
    pub per_device: Vec<DeviceQuality>,
    pub mean_psnr: f64,
}

/// Packets needed per layer given layer byte sizes and the per-packet
/// payload: ⌈size / payload⌉, the last packet padded.
pub fn packetize(sizes: &[u64], payload: u64) -> Result<Vec<usize>, VideoError> {
    if payload == 0 {
        return Err(VideoError::BadPayload);
    }
    sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if s == 0 {
                Err(VideoError::EmptyLayer(i + 1))
            } else {
                Ok(s.div_ceil(payload) as usize)
            }
        })
        .collect()
}

/// Slot budget for one GOP: ⌊frames · rate / (fps · packet_bits)⌋.
pub fn slots_per_gop(rate: f64, gop_frames: u32, fps: u32, packet_bits: u32) -> u64 {
    (gop_frames as f64 * rate / (fps as f64 * packet_bits as f64)).floor() as u64
}
