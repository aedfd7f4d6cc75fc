//! Fixtures shared by the benchmarks.

use tractvar_core::phones::Subtype;
use tractvar_core::ratings::RatingRecord;
use tractvar_core::synth::{generate_palate_trace, generate_pellet_sequence, SynthSpec};
use tractvar_core::{PalateTrace, PelletFrame};

pub fn articulography(frames: usize) -> (Vec<PelletFrame>, PalateTrace) {
    let spec = SynthSpec {
        n_frames: frames,
        ..SynthSpec::default()
    };
    (
        generate_pellet_sequence(&spec).expect("default spec is valid"),
        generate_palate_trace(&spec).expect("default spec is valid"),
    )
}

/// Three ratings per file with a deterministic mix of scores and subtypes.
pub fn rating_log(files: usize) -> Vec<RatingRecord> {
    let subtypes = [Subtype::WError, Subtype::LError, Subtype::VowelError];
    let mut out = Vec::with_capacity(files * 3);
    for f in 0..files {
        for r in 0..3 {
            let k = f * 7 + r * 3;
            let score = (k % 5 + 1) as u8;
            let subtype = if score <= 3 {
                Some(subtypes[k % 3])
            } else {
                None
            };
            out.push(RatingRecord::new(
                &format!("rater{r}"),
                &format!("file{f:05}"),
                score,
                subtype,
            ));
        }
    }
    out
}
