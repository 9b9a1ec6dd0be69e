//! Shared builders for the benchmark targets.

use kbstab_core::kb_model::{EntityId, Fact, KbTimestamp, ObjectValue, PropertyId, Snapshot};

/// Build a snapshot pair with `entities * properties` facts in the first
/// snapshot and one extra record for every fiftieth entity in the second.
pub fn snapshot_pair(entities: usize, properties: usize) -> (Snapshot, Snapshot) {
    let day = |y, m, d| KbTimestamp::from_ymd(y, m, d).unwrap();
    let props: Vec<PropertyId> = (0..properties)
        .map(|j| PropertyId::new(format!("P{j}")).unwrap())
        .collect();
    let mut facts1 = Vec::with_capacity(entities * properties);
    let mut facts2 = Vec::with_capacity(entities * properties + entities / 50 + 1);
    for i in 0..entities {
        let subject = EntityId::new(format!("Q{i:06}")).unwrap();
        for (j, property) in props.iter().enumerate() {
            let fact = Fact {
                subject: subject.clone(),
                property: property.clone(),
                object: ObjectValue::entity(format!("V{i}_{j}")).unwrap(),
                valid_time: Some(day(2010, 1, 1)),
                transaction_time: day(2012, 1, 1),
            };
            facts1.push(fact.clone());
            facts2.push(fact);
        }
        if i % 50 == 0 {
            facts2.push(Fact {
                subject,
                property: props[0].clone(),
                object: ObjectValue::entity(format!("NEW{i}")).unwrap(),
                valid_time: Some(day(2018, 3, 3)),
                transaction_time: day(2018, 3, 4),
            });
        }
    }
    let snap1 = Snapshot::new(day(2017, 1, 1), facts1).unwrap();
    let snap2 = Snapshot::new(day(2019, 1, 1), facts2).unwrap();
    (snap1, snap2)
}
