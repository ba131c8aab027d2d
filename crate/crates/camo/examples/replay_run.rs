//! Replay a recorded benchmark: responses come from files keyed by
//! (sample, kind, trial), so the whole run is reproducible byte for byte.
//!
//! ```sh
//! cargo run -p camo --example replay_run
//! ```

use camo::bench::{majority, run_trials, PromptKind, ReplayAdapter};

fn main() {
    let dir = std::env::temp_dir().join("camo-example-replay");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();

    // Record three "sessions" for one sample: two insecure, one refusal.
    let responses = [
        (1, "No, the code is insecure because the buffer write is unchecked."),
        (2, "I would need more context to be sure."),
        (3, "No, the code is insecure because the index may exceed the allocation."),
    ];
    for (trial, text) in responses {
        std::fs::write(dir.join(format!("sample-1__llvm-obf__{trial}.txt")), text).unwrap();
    }

    let adapter = ReplayAdapter::new(dir.clone());
    let records = run_trials(
        "sample-1",
        PromptKind::LlvmObf,
        "define i32 @f() {\nentry:\n  ret i32 0\n}\n",
        &adapter,
        3,
        |trial, attempt, raw| println!("raw capture: trial {trial} attempt {attempt}: {raw:?}"),
    )
    .unwrap();

    for r in &records {
        println!("trial {}: {:?}", r.trial, r.verdict);
    }
    let m = majority(&records).unwrap();
    println!(
        "majority: {:?} ({}–{}, {} invalid, {} valid votes)",
        m.final_label, m.votes.secure, m.votes.insecure, m.votes.invalid, m.valid_count
    );

    // Re-running the replay gives the identical records.
    let again = run_trials(
        "sample-1",
        PromptKind::LlvmObf,
        "define i32 @f() {\nentry:\n  ret i32 0\n}\n",
        &adapter,
        3,
        |_, _, _| {},
    )
    .unwrap();
    assert_eq!(records, again);
    println!("replay is deterministic");
}
