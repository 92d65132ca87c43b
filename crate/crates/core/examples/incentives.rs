//! Why strategic agents need delayed mechanisms: hiding on P1/P2 and
//! pretending on the three-solution instance, checked by exhaustive lookahead.

use repeated_delegation::agents::{evaluate_policy, lookahead, should_reveal, Hiding, HidingKind, Myopic, DEFAULT_NODE_LIMIT};
use repeated_delegation::instances::fixture;
use repeated_delegation::mechanisms::{iterative_search, DelayedIterativeSearch};

fn main() -> repeated_delegation::Result<()> {
    let gamma = 0.9;
    let first = (0..).find(|&k| should_reveal(1, k, gamma, 1e-14)).unwrap_or(0);
    println!("P1 agent with y(a2)=1e-14 hides a2 unless it can profit within {first} rounds");

    let p1 = fixture("P1(0.1,1e-14)")?;
    let sols = p1.solutions().expect("deterministic");
    for horizon in [4usize, 8, 10] {
        let plan = lookahead(sols, &iterative_search(), gamma, horizon, DEFAULT_NODE_LIMIT)?;
        let (truthful, _) = evaluate_policy(sols, &iterative_search(), &mut Myopic, gamma, horizon)?;
        println!(
            "P1, greedy search, horizon {horizon:>2}: optimal value {:.4} vs truthful {truthful:.4}; plan {:?}",
            plan.value, plan.proposals
        );
    }

    let k = fixture("AppendixK(0.1)")?;
    let sols = k.solutions().expect("deterministic");
    let g = 0.999;
    for d in [0usize, 3, 12] {
        let mech = DelayedIterativeSearch::with_delay(d);
        let (pretend, _) = evaluate_policy(sols, &mech, &mut Hiding::new(HidingKind::NonDiscounting, g, 0), g, 10)?;
        let (truthful, _) = evaluate_policy(sols, &mech, &mut Myopic, g, 10)?;
        println!("AppendixK, D={d:>2}, horizon 10: pretend {pretend:.4}, truthful {truthful:.4}");
    }
    Ok(())
}
