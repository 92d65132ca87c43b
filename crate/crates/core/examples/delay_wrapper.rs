//! Wrapping any mechanism so that round t only sees feedback from rounds <= t - D.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use repeated_delegation::agents::Myopic;
use repeated_delegation::engine::play;
use repeated_delegation::instances::fixture;
use repeated_delegation::mechanisms::{delay_for, DelayWrapper, Mechanism, UcbThreshold};
use repeated_delegation::verify::mutation_changes;

fn main() -> repeated_delegation::Result<()> {
    let d = delay_for(0.5, 0.1)?;
    println!("gamma=0.5, eps=0.1 -> D = {d}");
    let inst = fixture("TwoUniformComplement")?;
    let horizon = 400;
    let protos: Vec<Box<dyn Mechanism>> =
        vec![Box::new(UcbThreshold::new(horizon)?), Box::new(DelayWrapper::new(UcbThreshold::new(horizon)?, d))];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for proto in protos {
        let mut m = proto.clone_box();
        let mut base = Vec::new();
        let mut total = 0.0;
        play(&inst, m.as_mut(), &mut Myopic, 0.5, false, horizon, 1, false, |r| {
            total += r.principal_utility;
            base.push(r.clone());
        })?;
        let changed = mutation_changes(proto.as_ref(), d, &base, 500, &mut rng);
        println!(
            "{:<35} utility/round {:.4}; announcements changed by rewriting the last {d} records: {changed}/500",
            proto.name(),
            total / horizon as f64
        );
    }
    Ok(())
}
