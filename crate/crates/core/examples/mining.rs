//! Mines a short chain at several difficulties, then shows that one flipped
//! byte in the serialized chain is caught.

use blockroam::chain::{self, Block, Chain, MineOutcome, MiningJob, NodeId, Role, Target};

fn main() {
    for bits in [4, 8, 12] {
        let target = Target::from_difficulty(bits).unwrap();
        let mut chain = Chain::new();
        let mut attempts = 0;
        for id in 0..20 {
            let block = Block::new(id, NodeId(id as u32 % 3), 50 * (id + 1), chain.head_hash());
            let mut job = MiningJob::new(block, NodeId(0), Role::Full).unwrap();
            // 64 hashes per tick, as a full node would spend them
            loop {
                match chain::mine_step(&job, 64, target).unwrap() {
                    MineOutcome::InProgress { job: next, .. } => job = next,
                    MineOutcome::Found { job: done, .. } => {
                        attempts += done.attempts_done;
                        chain.append(done.block, target).unwrap();
                        break;
                    }
                }
            }
        }
        println!(
            "{bits:>2} bits: mean attempts {:>7.1} (expected {:>6}), head {}",
            attempts as f64 / chain.len() as f64,
            target.expected_attempts(),
            hex::encode(&chain.head_hash()[..6])
        );
        assert!(chain::verify_chain(&chain, target));

        let mut bytes = chain.to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        let tampered = Chain::from_bytes(&bytes).is_ok_and(|c| chain::verify_chain(&c, target));
        println!("         tampered copy verifies: {tampered}");
    }

    let half = MiningJob::new(Block::new(0, NodeId(1), 50, [0; 32]), NodeId(1), Role::Half);
    println!("half node tries to mine: {}", half.unwrap_err());
}
