//! Simulated servers.
//!
//! A server is a state machine over its own share accumulator. It only ever
//! sees its own shares, arriving on a queue, and it only ever adds or subtracts
//! them, since every sketch entry is `±1`. No server talks to another.

use std::sync::mpsc::{Receiver, SyncSender};

use crate::error::{Error, Result};
use crate::mpc::share::ShareMatrix;
use crate::sketch::SketchDecomposition;

pub enum ServerMsg {
    /// Client `client`'s share of its `dim·s` message entries.
    Share { client: usize, values: Vec<u64> },
    Finish,
}

pub struct Server<'a> {
    id: u16,
    dec: &'a SketchDecomposition,
    dim: usize,
    acc: Vec<u64>,
    received: Vec<bool>,
    received_bytes: u64,
}

/// What a finished server hands to the collector.
pub struct ServerOutput {
    pub shares: ShareMatrix,
    pub received_bytes: u64,
}

impl<'a> Server<'a> {
    pub fn new(id: u16, dec: &'a SketchDecomposition, dim: usize) -> Self {
        Server {
            id,
            dec,
            dim,
            acc: vec![0; dec.m() * dim],
            received: vec![false; dec.n()],
            received_bytes: 0,
        }
    }

    /// Processes one message; returns the output share on `Finish`.
    pub fn handle(&mut self, msg: ServerMsg) -> Result<Option<ServerOutput>> {
        match msg {
            ServerMsg::Share { client, values } => {
                if client >= self.dec.n() || self.received[client] {
                    return Err(Error::Internal(format!("server {} got a bad or repeated client {client}", self.id)));
                }
                if values.len() != self.dim * self.dec.s() {
                    return Err(Error::shape(format!("client {client} sent {} values", values.len())));
                }
                self.received[client] = true;
                self.received_bytes += 8 * values.len() as u64;
                absorb(self.dec, &mut self.acc, client, &values, self.dim);
                Ok(None)
            }
            ServerMsg::Finish => {
                if let Some(j) = self.received.iter().position(|r| !r) {
                    return Err(Error::Internal(format!("server {} finished without client {j}", self.id)));
                }
                let shares = ShareMatrix {
                    server_id: self.id,
                    rows: self.dec.m(),
                    cols: self.dim,
                    data: std::mem::take(&mut self.acc),
                };
                Ok(Some(ServerOutput { shares, received_bytes: self.received_bytes }))
            }
        }
    }

    /// Drains the queue until `Finish`, then sends the output to the collector.
    pub fn run(mut self, inbox: Receiver<ServerMsg>, outbox: SyncSender<Result<ServerOutput>>) {
        for msg in inbox {
            match self.handle(msg) {
                Ok(None) => {}
                Ok(Some(out)) => {
                    let _ = outbox.send(Ok(out));
                    return;
                }
                Err(e) => {
                    let _ = outbox.send(Err(e));
                    return;
                }
            }
        }
        let _ = outbox.send(Err(Error::Internal(format!("server {} queue closed early", self.id))));
    }
}

// Output layout is row-major m×dim.
fn absorb(dec: &SketchDecomposition, acc: &mut [u64], client: usize, values: &[u64], dim: usize) {
    for (i, piece) in dec.pieces().iter().enumerate() {
        let base = piece.rows[client] as usize * dim;
        let block = &values[i * dim..(i + 1) * dim];
        if piece.signs[client] > 0 {
            for (a, &v) in acc[base..base + dim].iter_mut().zip(block) {
                *a = a.wrapping_add(v);
            }
        } else {
            for (a, &v) in acc[base..base + dim].iter_mut().zip(block) {
                *a = a.wrapping_sub(v);
            }
        }
    }
}

/// `Σ_i S_i·X_i` over one server's `n × (dim·s)` input shares, in ring arithmetic.
pub fn server_apply(dec: &SketchDecomposition, shares: &ShareMatrix, dim: usize) -> Result<ShareMatrix> {
    if shares.rows != dec.n() || shares.cols != dim * dec.s() {
        return Err(Error::shape(format!(
            "shares are {}x{}, expected {}x{}",
            shares.rows,
            shares.cols,
            dec.n(),
            dim * dec.s()
        )));
    }
    let mut acc = vec![0u64; dec.m() * dim];
    for j in 0..dec.n() {
        absorb(dec, &mut acc, j, shares.row(j), dim);
    }
    Ok(ShareMatrix { server_id: shares.server_id, rows: dec.m(), cols: dim, data: acc })
}
