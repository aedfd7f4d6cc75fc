use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::phones::Target;

pub const BATCH_SIZE: usize = 100;

/// An unrated file as known to the study database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolItem {
    pub file_id: String,
    pub speaker_id: String,
    pub timepoint: String,
    pub target: Target,
    pub target_word: String,
    pub audio_ref: String,
}

/// What a rater is shown: no speaker or timepoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchItem {
    pub file_id: String,
    pub target: Target,
    pub target_word: String,
    pub audio_ref: String,
}

impl From<&PoolItem> for BatchItem {
    fn from(p: &PoolItem) -> Self {
        Self {
            file_id: p.file_id.clone(),
            target: p.target,
            target_word: p.target_word.clone(),
            audio_ref: p.audio_ref.clone(),
        }
    }
}

/// Shuffles the pool with a seeded ChaCha8 stream and cuts it into batches
/// of `size` (the last one may be short).
pub fn make_batches(pool: &[PoolItem], size: usize, seed: u64) -> Vec<Vec<BatchItem>> {
    assert!(size > 0, "batch size must be positive");
    let mut items: Vec<BatchItem> = pool.iter().map(BatchItem::from).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    items.chunks(size).map(<[BatchItem]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> Vec<PoolItem> {
        (0..n)
            .map(|i| PoolItem {
                file_id: format!("f{i:03}"),
                speaker_id: format!("spk{}", i % 7),
                timepoint: "pre".into(),
                target: Target::R,
                target_word: "rabbit".into(),
                audio_ref: format!("a{i}"),
            })
            .collect()
    }

    #[test]
    fn partitions_pool() {
        let b = make_batches(&pool(250), BATCH_SIZE, 3);
        assert_eq!(
            b.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![100, 100, 50]
        );
        let mut ids: Vec<_> = b.iter().flatten().map(|i| i.file_id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 250);
    }

    #[test]
    fn seeded_order() {
        assert_eq!(
            make_batches(&pool(30), 10, 9),
            make_batches(&pool(30), 10, 9)
        );
        assert_ne!(
            make_batches(&pool(30), 10, 9),
            make_batches(&pool(30), 10, 10)
        );
    }

    #[test]
    fn payload_is_masked() {
        let b = make_batches(&pool(3), 10, 1);
        let json = serde_json::to_value(&b[0][0]).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert!(!keys
            .iter()
            .any(|k| k.contains("speaker") || k.contains("timepoint")));
    }
}
