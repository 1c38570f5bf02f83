//! Checkpoint persistence: magic `PGCK`, version, architecture tag, layer
//! shape table, little-endian f32 weights, metadata. Bit-exact round trips.

use std::io::{Read, Write};
use std::path::Path;

use super::grasp::GraspNet;
use super::push::PushNet;
use super::NetError;

const MAGIC: &[u8; 4] = b"PGCK";
const VERSION: u16 = 1;

pub const ARCH_GRASP: &str = "grasp-1024";
/// Grasp evaluator trained on ablation states (no gripper point cloud); the
/// network layout is identical, but state assembly must match at inference.
pub const ARCH_GRASP_NOPC: &str = "grasp-1024-nopc";
pub const ARCH_PUSH: &str = "push-192";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub epoch: u32,
    pub loss: f32,
    pub seed: u64,
}

/// A persisted evaluator; the architecture tag selects the layout.
#[derive(Clone, Debug)]
pub enum Checkpoint {
    Grasp { net: GraspNet<f32>, meta: CheckpointMeta, ablated: bool },
    Push(PushNet<f32>, CheckpointMeta),
}

impl Checkpoint {
    pub fn meta(&self) -> &CheckpointMeta {
        match self {
            Checkpoint::Grasp { meta, .. } => meta,
            Checkpoint::Push(_, m) => m,
        }
    }

    pub fn arch(&self) -> &'static str {
        match self {
            Checkpoint::Grasp { ablated: false, .. } => ARCH_GRASP,
            Checkpoint::Grasp { ablated: true, .. } => ARCH_GRASP_NOPC,
            Checkpoint::Push(..) => ARCH_PUSH,
        }
    }

    /// The grasp net plus whether it expects ablation states.
    pub fn as_grasp(&self) -> Option<(&GraspNet<f32>, bool)> {
        match self {
            Checkpoint::Grasp { net, ablated, .. } => Some((net, *ablated)),
            Checkpoint::Push(..) => None,
        }
    }

    pub fn as_push(&self) -> Option<&PushNet<f32>> {
        match self {
            Checkpoint::Push(net, _) => Some(net),
            Checkpoint::Grasp { .. } => None,
        }
    }

    pub fn save(&self, w: &mut impl Write) -> Result<(), NetError> {
        let (shapes, flat, meta) = match self {
            Checkpoint::Grasp { net, meta, .. } => (
                net.layers().iter().map(|l| (l.fan_in() as u32, l.fan_out() as u32)).collect::<Vec<_>>(),
                net.flat_params(),
                meta,
            ),
            Checkpoint::Push(net, meta) => (
                net.layers().iter().map(|l| (l.fan_in() as u32, l.fan_out() as u32)).collect::<Vec<_>>(),
                net.flat_params(),
                meta,
            ),
        };
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let tag = self.arch().as_bytes();
        w.write_all(&(tag.len() as u16).to_le_bytes())?;
        w.write_all(tag)?;
        w.write_all(&(shapes.len() as u16).to_le_bytes())?;
        for (fan_in, fan_out) in &shapes {
            w.write_all(&fan_in.to_le_bytes())?;
            w.write_all(&fan_out.to_le_bytes())?;
        }
        for v in &flat {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&meta.epoch.to_le_bytes())?;
        w.write_all(&meta.loss.to_le_bytes())?;
        w.write_all(&meta.seed.to_le_bytes())?;
        Ok(())
    }

    pub fn load(r: &mut impl Read) -> Result<Checkpoint, NetError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NetError::BadCheckpoint("bad magic".into()));
        }
        let version = read_u16(r)?;
        if version != VERSION {
            return Err(NetError::BadCheckpoint(format!("unsupported version {version}")));
        }
        let tag_len = read_u16(r)? as usize;
        let mut tag = vec![0u8; tag_len];
        r.read_exact(&mut tag)?;
        let tag = String::from_utf8(tag).map_err(|e| NetError::BadCheckpoint(e.to_string()))?;
        let n_layers = read_u16(r)? as usize;
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            shapes.push((read_u32(r)? as usize, read_u32(r)? as usize));
        }
        let n_params: usize = shapes.iter().map(|&(i, o)| i * o + o).sum();
        let mut buf = vec![0u8; n_params * 4];
        r.read_exact(&mut buf)?;
        let flat: Vec<f32> = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let meta = CheckpointMeta { epoch: read_u32(r)?, loss: read_f32(r)?, seed: read_u64(r)? };

        match tag.as_str() {
            ARCH_GRASP | ARCH_GRASP_NOPC => {
                let mut net = GraspNet::<f32>::init(0);
                check_shapes(&shapes, &net.layers().map(|l| (l.fan_in(), l.fan_out())))?;
                net.set_flat_params(&flat);
                Ok(Checkpoint::Grasp { net, meta, ablated: tag == ARCH_GRASP_NOPC })
            }
            ARCH_PUSH => {
                let mut net = PushNet::<f32>::init(0);
                check_shapes(&shapes, &net.layers().map(|l| (l.fan_in(), l.fan_out())))?;
                net.set_flat_params(&flat);
                Ok(Checkpoint::Push(net, meta))
            }
            other => Err(NetError::BadCheckpoint(format!("unknown architecture `{other}`"))),
        }
    }

    pub fn save_to_path(&self, path: &Path) -> Result<(), NetError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save(&mut f)
    }

    pub fn load_from_path(path: &Path) -> Result<Checkpoint, NetError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::load(&mut f)
    }
}

fn check_shapes(got: &[(usize, usize)], want: &[(usize, usize)]) -> Result<(), NetError> {
    if got != want {
        return Err(NetError::BadCheckpoint(format!("layer shapes {got:?}, expected {want:?}")));
    }
    Ok(())
}

fn read_u16(r: &mut impl Read) -> Result<u16, NetError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32, NetError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> Result<f32, NetError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, NetError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
