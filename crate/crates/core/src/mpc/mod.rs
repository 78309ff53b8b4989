//! Secret-shared execution of the pipeline.
//!
//! Clients encode their noisy messages in fixed point, split them into
//! additive shares over `Z_{2^64}` and send one share to each server. Servers
//! apply the public transform locally, a collector adds up their outputs,
//! decodes and rescales by `1/√s`. Servers run on their own threads and only
//! communicate through queues.

pub mod codec;
pub mod comm;
pub mod server;
pub mod share;
pub mod wire;

use std::sync::mpsc::sync_channel;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use codec::FixedPointCodec;
pub use comm::CommReport;
pub use server::{server_apply, Server, ServerMsg, ServerOutput};
pub use share::{reconstruct, share, ShareMatrix};

use crate::error::{Error, Result};
use crate::mechanism::{DataMatrix, NoiseMode, PipelineOptions};
use crate::noise::{NoiseCalibration, ThresholdContext};
use crate::rng::{client_rng, derive_seed, stream_rng};
use crate::sketch::SketchDecomposition;

/// Noise samples are clipped to `±CLIP_FACTOR·η` before encoding.
pub const CLIP_FACTOR: f64 = 65536.0;
const QUEUE_DEPTH: usize = 1024;
const SHARE_LABEL: u64 = 0x5348_4152_45;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcOutput {
    #[serde(skip)]
    pub sketch: DMatrix<f64>,
    pub report: CommReport,
    pub clipped: u64,
    pub clip_rate: f64,
    /// Entrywise bound on the distance to the plaintext pipeline when no noise
    /// sample was clipped: `(1/√s)·L·2^{−f−1}` plus float rounding, where `L`
    /// is the largest row load summed over pieces. This is tighter than the
    /// conservative `n·s·2^{−f}·(1/√s)·L`.
    pub quantization_bound: f64,
    pub zeroed: bool,
}

/// Runs the whole protocol with `servers` simulated servers.
pub fn mpc_pipeline(
    data: &DataMatrix,
    dec: &SketchDecomposition,
    cal: &NoiseCalibration,
    codec: FixedPointCodec,
    servers: usize,
    opts: &PipelineOptions,
) -> Result<MpcOutput> {
    if servers < 2 {
        return Err(Error::param(format!("the protocol needs at least 2 servers, got {servers}")));
    }
    if servers > u16::MAX as usize {
        return Err(Error::param("server ids are 16-bit"));
    }
    if opts.noise_mode != NoiseMode::PerClient {
        return Err(Error::param("the secret-shared path simulates every client; use per-client noise"));
    }
    if dec.n() != data.n() {
        return Err(Error::shape(format!("sketch has {} columns for {} clients", dec.n(), data.n())));
    }
    cal.validate()?;
    let (n, s, dim) = (dec.n(), dec.s(), data.message_dim());
    let clip = CLIP_FACTOR * cal.eta();
    let msg_bound = data.eta() + if cal.is_zero() { 0.0 } else { clip };
    codec.check_range(n, s, msg_bound)?;
    let zeroed = opts.threshold.as_ref().is_some_and(ThresholdContext::zero_branch);

    let (outputs, clipped) = std::thread::scope(|scope| -> Result<(Vec<ServerOutput>, u64)> {
        let (out_tx, out_rx) = sync_channel(servers);
        let mut inboxes = Vec::with_capacity(servers);
        for id in 0..servers {
            let (tx, rx) = sync_channel(QUEUE_DEPTH);
            let server = Server::new(id as u16, dec, dim);
            let out_tx = out_tx.clone();
            scope.spawn(move || server.run(rx, out_tx));
            inboxes.push(tx);
        }
        drop(out_tx);

        let mut clipped = 0u64;
        let mut send_failed = false;
        'clients: for j in 0..n {
            let message = if zeroed {
                vec![0.0; dim * s]
            } else {
                let (msg, c) = clipped_message(&data.joint_row(j), cal, s, clip, &mut client_rng(opts.seed, j));
                clipped += c;
                msg
            };
            let encoded = message.iter().map(|&v| codec.encode(v)).collect::<Result<Vec<u64>>>()?;
            let mut share_rng = stream_rng(derive_seed(opts.seed, &[SHARE_LABEL]), j as u64);
            for (tx, values) in inboxes.iter().zip(share(&encoded, servers, &mut share_rng)?) {
                if tx.send(ServerMsg::Share { client: j, values }).is_err() {
                    send_failed = true;
                    break 'clients;
                }
            }
        }
        if !send_failed {
            for tx in &inboxes {
                let _ = tx.send(ServerMsg::Finish);
            }
        }
        drop(inboxes);
        let outputs = out_rx.iter().collect::<Result<Vec<_>>>()?;
        if outputs.len() != servers {
            return Err(Error::Internal(format!("{} of {servers} servers reported", outputs.len())));
        }
        Ok((outputs, clipped))
    })?;

    let (sketch, report) = collect(dec, dim, codec, outputs)?;
    let max_load = dec.row_loads().into_iter().max().unwrap_or(0) as f64;
    let quantization_bound =
        dec.scale() * max_load * codec.resolution() + 8.0 * f64::EPSILON * max_load * msg_bound.max(1.0);
    Ok(MpcOutput {
        sketch,
        report,
        clipped,
        clip_rate: clipped as f64 / (n * dim * s) as f64,
        quantization_bound,
        zeroed,
    })
}

/// The client message with the same noise draws as the plaintext randomizer,
/// except that each noise sample is clipped to `±clip`.
fn clipped_message<R: Rng + ?Sized>(row: &[f64], cal: &NoiseCalibration, s: usize, clip: f64, rng: &mut R) -> (Vec<f64>, u64) {
    let mut clipped = 0;
    let mut out = Vec::with_capacity(row.len() * s);
    for _ in 0..s {
        for &v in row {
            let g = cal.sample(rng);
            if g.abs() > clip {
                clipped += 1;
            }
            out.push(v + g.clamp(-clip, clip));
        }
    }
    (out, clipped)
}

/// Moves every server output through the wire format, reconstructs and decodes.
fn collect(
    dec: &SketchDecomposition,
    dim: usize,
    codec: FixedPointCodec,
    mut outputs: Vec<ServerOutput>,
) -> Result<(DMatrix<f64>, CommReport)> {
    outputs.sort_by_key(|o| o.shares.server_id);
    let servers = outputs.len();
    let mut input_bytes = 0u64;
    let mut output_bytes = 0u64;
    let mut received = Vec::with_capacity(servers);
    for out in &outputs {
        input_bytes += out.received_bytes;
        let header = wire::WireHeader {
            n: dec.m() as u64,
            d: dim as u32,
            s: 1,
            frac_bits: codec.frac_bits,
            server_id: out.shares.server_id,
        };
        let mut buf = Vec::new();
        output_bytes += wire::write_shares(&mut buf, &header, &out.shares)?;
        received.push(wire::read_shares(&buf[..])?.1.data);
    }
    let report = CommReport {
        n: dec.n(),
        d: dim,
        s: dec.s(),
        m: dec.m(),
        servers,
        input_bytes,
        output_bytes,
        total_bytes: input_bytes + output_bytes,
    };
    if report != CommReport::for_params(dec.n(), dim, dec.s(), dec.m(), servers) {
        return Err(Error::Internal(format!("byte count {report:?} disagrees with the accounting formula")));
    }
    let plain = reconstruct(&received);
    let scale = dec.scale();
    let sketch = DMatrix::from_fn(dec.m(), dim, |r, c| codec.decode(plain[r * dim + c]) * scale);
    Ok((sketch, report))
}

/// Shares every row of an `n×cols` ring matrix, giving one [`ShareMatrix`] per server.
pub fn share_rows<R: Rng + ?Sized>(plain: &[Vec<u64>], servers: usize, rng: &mut R) -> Result<Vec<ShareMatrix>> {
    let cols = plain.first().map_or(0, Vec::len);
    let mut out: Vec<ShareMatrix> = (0..servers).map(|id| ShareMatrix::zeros(id as u16, plain.len(), cols)).collect();
    for (j, row) in plain.iter().enumerate() {
        for (sm, sh) in out.iter_mut().zip(share(row, servers, rng)?) {
            sm.data[j * cols..(j + 1) * cols].copy_from_slice(&sh);
        }
    }
    Ok(out)
}

/// Ring sum of several servers' share matrices.
pub fn reconstruct_matrices(parts: &[ShareMatrix]) -> Vec<u64> {
    let data: Vec<Vec<u64>> = parts.iter().map(|p| p.data.clone()).collect();
    reconstruct(&data)
}
