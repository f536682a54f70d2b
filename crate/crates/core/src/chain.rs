//! Block lifecycle: generation, hand-off, proof-of-work and the chain.
//!
//! Headers use a fixed 96-byte canonical encoding, little-endian:
//!
//! | bytes   | field            |
//! |---------|------------------|
//! | 0..8    | `id`             |
//! | 8..16   | `creator`        |
//! | 16..24  | `created_tick`   |
//! | 24..56  | `prev_hash`      |
//! | 56..88  | `payload_digest` |
//! | 88..96  | `nonce`          |
//!
//! `header_hash` is SHA-256 of that encoding, read as a big-endian 256-bit
//! integer when compared against the target `2^(256 - k)`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::radio::LinkVerdict;

pub type Digest = [u8; 32];

pub const ZERO_DIGEST: Digest = [0u8; 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub type BlockId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Full,
    Half,
}

impl Role {
    pub fn can_mine(self) -> bool {
        self == Role::Full
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStatus {
    /// Still with its creator.
    Generated,
    /// Handed off at least once and not currently being mined.
    InTransit,
    Mining,
    Validated,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub creator: NodeId,
    pub created_tick: u64,
    #[serde(with = "hex_digest")]
    pub prev_hash: Digest,
    #[serde(with = "hex_digest")]
    pub payload_digest: Digest,
    pub nonce: u64,
    pub status: BlockStatus,
}

impl Block {
    pub const ENCODED_LEN: usize = 96;

    pub fn new(id: BlockId, creator: NodeId, created_tick: u64, prev_hash: Digest) -> Self {
        Self {
            id,
            creator,
            created_tick,
            prev_hash,
            payload_digest: payload_digest(id, creator, created_tick),
            nonce: 0,
            status: BlockStatus::Generated,
        }
    }

    pub fn encode_header(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        out[0..8].copy_from_slice(&self.id.to_le_bytes());
        out[8..16].copy_from_slice(&(self.creator.0 as u64).to_le_bytes());
        out[16..24].copy_from_slice(&self.created_tick.to_le_bytes());
        out[24..56].copy_from_slice(&self.prev_hash);
        out[56..88].copy_from_slice(&self.payload_digest);
        out[88..96].copy_from_slice(&self.nonce.to_le_bytes());
        out
    }

    /// Decodes a canonical header. The status is set to `Validated`, since
    /// only chained blocks are ever serialized this way.
    pub fn decode_header(bytes: &[u8]) -> Result<Self, ChainError> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(ChainError::Malformed(format!("header is {} bytes", bytes.len())));
        }
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let creator = u32::try_from(u64_at(8))
            .map_err(|_| ChainError::Malformed("creator id exceeds 32 bits".into()))?;
        Ok(Self {
            id: u64_at(0),
            creator: NodeId(creator),
            created_tick: u64_at(16),
            prev_hash: bytes[24..56].try_into().unwrap(),
            payload_digest: bytes[56..88].try_into().unwrap(),
            nonce: u64_at(88),
            status: BlockStatus::Validated,
        })
    }

    pub fn header_hash(&self) -> Digest {
        Sha256::digest(self.encode_header()).into()
    }

    pub fn has_consistent_payload(&self) -> bool {
        self.payload_digest == payload_digest(self.id, self.creator, self.created_tick)
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.status, BlockStatus::Validated | BlockStatus::Expired)
    }
}

/// Synthetic payload commitment: SHA-256 over `(id, creator, created_tick)`
/// as 24 little-endian bytes.
pub fn payload_digest(id: BlockId, creator: NodeId, created_tick: u64) -> Digest {
    let mut buf = [0u8; 24];
    buf[0..8].copy_from_slice(&id.to_le_bytes());
    buf[8..16].copy_from_slice(&(creator.0 as u64).to_le_bytes());
    buf[16..24].copy_from_slice(&created_tick.to_le_bytes());
    Sha256::digest(buf).into()
}

/// Proof-of-work target `2^(256 - bits)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Target {
    bits: u32,
}

impl Target {
    pub const MAX_BITS: u32 = 256;

    pub fn from_difficulty(bits: u32) -> Result<Self, ChainError> {
        if bits > Self::MAX_BITS {
            return Err(ChainError::Malformed(format!("difficulty {bits} exceeds 256 bits")));
        }
        Ok(Self { bits })
    }

    pub fn difficulty_bits(&self) -> u32 {
        self.bits
    }

    /// `hash < 2^(256 - bits)`, i.e. the leading `bits` bits are zero.
    pub fn is_met_by(&self, hash: &Digest) -> bool {
        leading_zero_bits(hash) >= self.bits
    }

    /// Expected number of hash attempts per solution.
    pub fn expected_attempts(&self) -> f64 {
        2f64.powi(self.bits as i32)
    }
}

pub fn leading_zero_bits(hash: &Digest) -> u32 {
    let mut n = 0;
    for byte in hash {
        if *byte == 0 {
            n += 8;
        } else {
            return n + byte.leading_zeros();
        }
    }
    n
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("no active nodes to create a block")]
    NoActiveNodes,
    #[error("no usable link for the transfer")]
    NoLink,
    #[error("sender does not hold block {0}")]
    NotHolder(BlockId),
    #[error("only full nodes may mine")]
    RoleViolation,
    #[error("block {0} does not extend the chain head")]
    StaleParent(BlockId),
    #[error("block {0} does not meet the proof-of-work target")]
    NotValidated(BlockId),
    #[error("malformed chain data: {0}")]
    Malformed(String),
}

/// Draws the creator uniformly from `nodes` and builds a fresh block.
pub fn generate_block<R: Rng + ?Sized>(
    rng: &mut R,
    id: BlockId,
    tick: u64,
    nodes: &[NodeId],
    chain_head: Digest,
) -> Result<(Block, NodeId), ChainError> {
    if nodes.is_empty() {
        return Err(ChainError::NoActiveNodes);
    }
    let creator = nodes[rng.gen_range(0..nodes.len())];
    Ok((Block::new(id, creator, tick, chain_head), creator))
}

/// Anything that can hold blocks.
pub trait Holder {
    fn holds(&self, block: BlockId) -> bool;
}

/// Checks a hand-off and marks the block in transit. Ownership itself moves
/// when the simulation completes the tick.
pub fn start_transfer(block: &Block, from: &impl Holder, verdict: &LinkVerdict) -> Result<Block, ChainError> {
    if !from.holds(block.id) {
        return Err(ChainError::NotHolder(block.id));
    }
    if !verdict.usable {
        return Err(ChainError::NoLink);
    }
    Ok(Block { status: BlockStatus::InTransit, ..block.clone() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningJob {
    pub block: Block,
    pub miner: NodeId,
    pub miner_role: Role,
    pub attempts_done: u64,
    pub next_nonce: u64,
}

impl MiningJob {
    pub fn new(block: Block, miner: NodeId, miner_role: Role) -> Result<Self, ChainError> {
        if !miner_role.can_mine() {
            return Err(ChainError::RoleViolation);
        }
        Ok(Self {
            block: Block { status: BlockStatus::Mining, ..block },
            miner,
            miner_role,
            attempts_done: 0,
            next_nonce: 0,
        })
    }

    /// Points the job at a new parent; the nonce search restarts.
    pub fn rebase(&mut self, parent: Digest) {
        if self.block.prev_hash != parent {
            self.block.prev_hash = parent;
            self.next_nonce = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MineOutcome {
    InProgress { job: MiningJob, attempts: u64 },
    /// `job.block.nonce` holds the winning nonce.
    Found { job: MiningJob, nonce: u64, attempts: u64 },
}

impl MineOutcome {
    pub fn job(&self) -> &MiningJob {
        match self {
            MineOutcome::InProgress { job, .. } | MineOutcome::Found { job, .. } => job,
        }
    }

    /// Hashes evaluated during this step.
    pub fn attempts(&self) -> u64 {
        match self {
            MineOutcome::InProgress { attempts, .. } | MineOutcome::Found { attempts, .. } => *attempts,
        }
    }
}

/// Tries nonces `[next_nonce, next_nonce + hashes)` and stops at the first
/// one whose header hash meets `target`.
pub fn mine_step(job: &MiningJob, hashes: u64, target: Target) -> Result<MineOutcome, ChainError> {
    if !job.miner_role.can_mine() {
        return Err(ChainError::RoleViolation);
    }
    let mut header = job.block.encode_header();
    let mut next = job.clone();
    for i in 0..hashes {
        let nonce = job.next_nonce.wrapping_add(i);
        header[88..96].copy_from_slice(&nonce.to_le_bytes());
        let hash: Digest = Sha256::digest(header).into();
        if target.is_met_by(&hash) {
            next.block.nonce = nonce;
            next.next_nonce = nonce.wrapping_add(1);
            next.attempts_done += i + 1;
            return Ok(MineOutcome::Found { job: next, nonce, attempts: i + 1 });
        }
    }
    next.next_nonce = job.next_nonce.wrapping_add(hashes);
    next.attempts_done += hashes;
    Ok(MineOutcome::InProgress { job: next, attempts: hashes })
}

/// The single authoritative chain. Header hashes are recorded alongside
/// the blocks so that a serialized chain commits to every byte.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Chain {
    blocks: Vec<Block>,
    hashes: Vec<Digest>,
}

/// Serialized size of one chain record: header plus recorded hash.
pub const CHAIN_RECORD_LEN: usize = Block::ENCODED_LEN + 32;

impl Chain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn hashes(&self) -> &[Digest] {
        &self.hashes
    }

    pub fn head_hash(&self) -> Digest {
        self.hashes.last().copied().unwrap_or(ZERO_DIGEST)
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.iter().any(|b| b.id == id)
    }

    pub fn append(&mut self, block: Block, target: Target) -> Result<Digest, ChainError> {
        if block.prev_hash != self.head_hash() {
            return Err(ChainError::StaleParent(block.id));
        }
        let hash = block.header_hash();
        if !target.is_met_by(&hash) {
            return Err(ChainError::NotValidated(block.id));
        }
        self.blocks.push(Block { status: BlockStatus::Validated, ..block });
        self.hashes.push(hash);
        Ok(hash)
    }

    /// Whether every chain invariant holds under `target`.
    pub fn verify(&self, target: Target) -> bool {
        if self.blocks.len() != self.hashes.len() {
            return false;
        }
        let mut parent = ZERO_DIGEST;
        for (block, recorded) in self.blocks.iter().zip(&self.hashes) {
            let hash = block.header_hash();
            if block.prev_hash != parent
                || hash != *recorded
                || !target.is_met_by(&hash)
                || !block.has_consistent_payload()
                || block.status != BlockStatus::Validated
            {
                return false;
            }
            parent = hash;
        }
        true
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.blocks.len() * CHAIN_RECORD_LEN);
        for (block, hash) in self.blocks.iter().zip(&self.hashes) {
            out.extend_from_slice(&block.encode_header());
            out.extend_from_slice(hash);
        }
        out
    }

    /// Parses records without checking them; call [`Chain::verify`] after.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ChainError> {
        if !bytes.len().is_multiple_of(CHAIN_RECORD_LEN) {
            return Err(ChainError::Malformed(format!(
                "{} bytes is not a whole number of records",
                bytes.len()
            )));
        }
        let mut chain = Chain::new();
        for record in bytes.chunks_exact(CHAIN_RECORD_LEN) {
            chain.blocks.push(Block::decode_header(&record[..Block::ENCODED_LEN])?);
            chain.hashes.push(record[Block::ENCODED_LEN..].try_into().unwrap());
        }
        Ok(chain)
    }
}

pub fn verify_chain(chain: &Chain, target: Target) -> bool {
    chain.verify(target)
}

pub mod hex_digest {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Digest;

    pub fn serialize<S: Serializer>(d: &Digest, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Digest, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::TechId;
    use crate::rng;

    struct Holds(Vec<BlockId>);

    impl Holder for Holds {
        fn holds(&self, block: BlockId) -> bool {
            self.0.contains(&block)
        }
    }

    fn mine_to_completion(mut job: MiningJob, target: Target) -> MiningJob {
        loop {
            match mine_step(&job, 1000, target).unwrap() {
                MineOutcome::Found { job, .. } => return job,
                MineOutcome::InProgress { job: next, .. } => job = next,
            }
        }
    }

    fn build_chain(len: u64, target: Target) -> Chain {
        let mut chain = Chain::new();
        for id in 0..len {
            let block = Block::new(id, NodeId(id as u32 % 3), id * 50, chain.head_hash());
            let job = mine_to_completion(MiningJob::new(block, NodeId(0), Role::Full).unwrap(), target);
            chain.append(job.block, target).unwrap();
        }
        chain
    }

    #[test]
    fn encoding_layout_is_little_endian() {
        let mut b = Block::new(0x0102, NodeId(7), 50, [0xAA; 32]);
        b.nonce = 0xDEAD_BEEF;
        let enc = b.encode_header();
        assert_eq!(&enc[0..8], &[0x02, 0x01, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&enc[8..16], &[7, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&enc[16..24], &[50, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&enc[24..56], &[0xAA; 32]);
        assert_eq!(&enc[88..96], &[0xEF, 0xBE, 0xAD, 0xDE, 0, 0, 0, 0]);
        let back = Block::decode_header(&enc).unwrap();
        assert_eq!(back.encode_header(), enc);
    }

    #[test]
    fn singleton_creator() {
        let mut rng = rng::stream(1, rng::SIM_STREAM);
        let (block, who) = generate_block(&mut rng, 0, 50, &[NodeId(7)], ZERO_DIGEST).unwrap();
        assert_eq!(who, NodeId(7));
        assert_eq!(block.creator, NodeId(7));
        assert_eq!(block.status, BlockStatus::Generated);
        assert!(block.has_consistent_payload());
        assert_eq!(generate_block(&mut rng, 1, 50, &[], ZERO_DIGEST), Err(ChainError::NoActiveNodes));
    }

    #[test]
    fn transfer_checks() {
        let block = Block::new(3, NodeId(0), 0, ZERO_DIGEST);
        let up = LinkVerdict { usable: true, margin: 12.0, tech: TechId::Wifi };
        let down = LinkVerdict { usable: false, margin: -3.0, tech: TechId::FiveG };
        let moved = start_transfer(&block, &Holds(vec![3]), &up).unwrap();
        assert_eq!(moved.status, BlockStatus::InTransit);
        assert_eq!(start_transfer(&block, &Holds(vec![3]), &down), Err(ChainError::NoLink));
        assert_eq!(start_transfer(&block, &Holds(vec![]), &up), Err(ChainError::NotHolder(3)));
    }

    #[test]
    fn zero_difficulty_finds_first_nonce() {
        let target = Target::from_difficulty(0).unwrap();
        let job = MiningJob::new(Block::new(0, NodeId(0), 0, ZERO_DIGEST), NodeId(0), Role::Full).unwrap();
        match mine_step(&job, 1, target).unwrap() {
            MineOutcome::Found { nonce, attempts, .. } => {
                assert_eq!(nonce, 0);
                assert_eq!(attempts, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn half_miner_is_rejected() {
        let block = Block::new(0, NodeId(0), 0, ZERO_DIGEST);
        assert_eq!(MiningJob::new(block.clone(), NodeId(1), Role::Half), Err(ChainError::RoleViolation));
        let forged = MiningJob {
            block,
            miner: NodeId(1),
            miner_role: Role::Half,
            attempts_done: 0,
            next_nonce: 0,
        };
        assert_eq!(mine_step(&forged, 10, Target::from_difficulty(0).unwrap()), Err(ChainError::RoleViolation));
    }

    #[test]
    fn mining_is_deterministic_and_resumable() {
        let target = Target::from_difficulty(10).unwrap();
        let job = MiningJob::new(Block::new(9, NodeId(2), 100, ZERO_DIGEST), NodeId(2), Role::Full).unwrap();
        let one_shot = mine_step(&job, 1 << 20, target).unwrap();
        assert_eq!(one_shot, mine_step(&job, 1 << 20, target).unwrap());
        let stepped = mine_to_completion(job, target);
        let MineOutcome::Found { nonce, job: done, .. } = one_shot else { panic!() };
        assert_eq!(stepped.block.nonce, nonce);
        assert_eq!(done.attempts_done, nonce + 1);
        assert!(target.is_met_by(&done.block.header_hash()));
    }

    #[test]
    fn append_rules() {
        let target = Target::from_difficulty(8).unwrap();
        let mut chain = Chain::new();
        let block = Block::new(0, NodeId(0), 50, ZERO_DIGEST);
        let mined = mine_to_completion(MiningJob::new(block, NodeId(1), Role::Full).unwrap(), target);
        chain.append(mined.block.clone(), target).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.blocks()[0].status, BlockStatus::Validated);

        let stale = mine_to_completion(
            MiningJob::new(Block::new(1, NodeId(0), 100, ZERO_DIGEST), NodeId(1), Role::Full).unwrap(),
            target,
        );
        assert_eq!(chain.append(stale.block, target), Err(ChainError::StaleParent(1)));

        // search for a nonce that misses the target
        let mut bad = Block::new(2, NodeId(0), 150, chain.head_hash());
        while target.is_met_by(&bad.header_hash()) {
            bad.nonce += 1;
        }
        assert_eq!(chain.append(bad, target), Err(ChainError::NotValidated(2)));
        assert_eq!(chain.len(), 1);
    }

    #[test]
    fn verify_and_tamper() {
        let target = Target::from_difficulty(8).unwrap();
        assert!(verify_chain(&Chain::new(), target));
        let chain = build_chain(5, target);
        assert!(verify_chain(&chain, target));

        let bytes = chain.to_bytes();
        assert_eq!(Chain::from_bytes(&bytes).unwrap(), chain);
        for i in 0..5 {
            let mut tampered = bytes.clone();
            tampered[i * CHAIN_RECORD_LEN + 56] ^= 0x01; // payload_digest byte
            assert!(!Chain::from_bytes(&tampered).unwrap().verify(target));
        }
        assert!(Chain::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn target_matches_integer_comparison() {
        use num_bigint::BigUint;
        let mut rng = rng::stream(5, 0);
        for bits in [0u32, 1, 7, 8, 9, 16, 255, 256] {
            let target = Target::from_difficulty(bits).unwrap();
            let bound = BigUint::from(1u8) << (256 - bits);
            for _ in 0..200 {
                let mut h: Digest = rng.gen();
                // bias toward the boundary so both outcomes occur
                let zeros = rng.gen_range(0..=32usize).min((bits as usize).div_ceil(8));
                h[..zeros].fill(0);
                assert_eq!(target.is_met_by(&h), BigUint::from_bytes_be(&h) < bound, "bits={bits}");
            }
        }
        assert!(Target::from_difficulty(257).is_err());
    }
}
