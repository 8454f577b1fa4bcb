use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use super::*;
use crate::group::{interpolate_scalar, Bls12G1, TinyGroup};
use crate::sharing::AccessStructure;
use crate::wire::{DecBody, DkgMsg, Report};

struct Net<G: Group> {
    server: ServerState<G>,
    clients: BTreeMap<u64, ClientState<G>>,
    decs: BTreeMap<u64, DecryptorState<G>>,
    seed_msgs: Vec<crate::wire::SeedShareMsg>,
}

fn pre(n: usize, n_i: usize, kappa: usize) -> PreRoundConfig {
    PreRoundConfig { clients: n, decryptors: n_i, threshold: kappa, committee: None, retain_dealers: false }
}

fn setup<G: Group>(pre: &PreRoundConfig, rng: &mut ChaCha20Rng) -> Net<G> {
    let mut server = ServerState::<G>::new(rng);
    let keys: Vec<ClientKeys<G>> = (1..=pre.clients as u64).map(|i| ClientKeys::generate(i, rng)).collect();
    for k in &keys {
        server.register(&k.commit()).unwrap();
    }
    let root = server.commit_roster().unwrap();
    server.select_committee(pre).unwrap();
    let mut clients = BTreeMap::new();
    let mut seed_msgs = Vec::new();
    for k in keys {
        let (st, msgs) = pre_round_client(k, &root, &server.public_key(), pre, rng).unwrap();
        seed_msgs.extend(msgs);
        clients.insert(st.id(), st);
    }
    let mut decs: BTreeMap<u64, DecryptorState<G>> =
        server.decryptors().into_iter().map(|u| (u, DecryptorState::new(&clients[&u]).unwrap())).collect();
    let mut dkg = Vec::new();
    for (u, d) in decs.iter_mut() {
        dkg.extend(d.dkg_deal(&clients[u], rng).unwrap());
    }
    for m in &dkg {
        server.observe_dkg(m);
        if let DkgMsg::Deal { to, .. } = m {
            decs.get_mut(to).unwrap().on_dkg(&clients[to], m).unwrap();
        }
    }
    assert!(decs.values().all(|d| d.dkg_ready()));
    let vks: Vec<DkgMsg<G>> = decs.values_mut().map(|d| d.finish_dkg().unwrap()).collect();
    for m in &vks {
        server.observe_dkg(m);
        for (u, d) in decs.iter_mut() {
            d.on_dkg(&clients[u], m).unwrap();
        }
    }
    server.finish_dkg().unwrap();
    for m in &seed_msgs {
        decs.get_mut(&m.to).unwrap().on_seed_share(&clients[&m.to], m).unwrap();
    }
    Net { server, clients, decs, seed_msgs }
}

fn digest(t: u64, salt: u8) -> [u8; 32] {
    let mut d = [salt; 32];
    d[..8].copy_from_slice(&t.to_le_bytes());
    d
}

fn round_cfg(n: usize, n_i: usize, kappa: usize, len: usize, t: u64) -> RoundConfig {
    RoundConfig {
        t,
        digest: digest(t, 0),
        clients: n,
        selection: Selection::Static { n_t: n },
        decryptors: n_i,
        threshold: kappa,
        eta_c: Rate::from_ppm(0),
        eta_d: Rate::from_ppm(100_000),
        degree: 16,
        len,
        abort_rule: AbortRule::Quorum,
        mode: Mode::OneRound,
        hooks: MaskHooks::default(),
    }
}

fn reports<G: Group>(
    net: &Net<G>,
    cfg: &RoundConfig,
    inputs: &BTreeMap<u64, Vec<u32>>,
    dropped: &BTreeSet<u64>,
) -> Vec<Report> {
    cfg.selected()
        .unwrap()
        .into_iter()
        .filter(|i| !dropped.contains(i))
        .map(|i| net.clients[&i].report(cfg, &inputs[&i]).unwrap())
        .collect()
}

fn respond_all<G: Group>(
    net: &Net<G>,
    cfg: &RoundConfig,
    round: &RoundState,
    rng: &mut ChaCha20Rng,
) -> Vec<crate::wire::DecResp<G>> {
    let req = round.check_request();
    net.decs.iter().map(|(u, d)| d.respond(&net.clients[u], cfg, &req, rng).unwrap()).collect()
}

fn run<G: Group>(
    net: &Net<G>,
    cfg: &RoundConfig,
    inputs: &BTreeMap<u64, Vec<u32>>,
    dropped: &BTreeSet<u64>,
    rng: &mut ChaCha20Rng,
) -> Result<(Aggregate, RoundState)> {
    let round = net.server.collect(cfg, &reports(net, cfg, inputs, dropped))?;
    let responses = respond_all(net, cfg, &round, rng);
    Ok((net.server.unmask(cfg, &round, &responses)?, round))
}

fn random_inputs(n: usize, len: usize, rng: &mut ChaCha20Rng) -> BTreeMap<u64, Vec<u32>> {
    (1..=n as u64).map(|i| (i, (0..len).map(|_| rng.next_u32()).collect())).collect()
}

fn plain_sum(inputs: &BTreeMap<u64, Vec<u32>>, ids: &[u64], len: usize) -> Vec<u32> {
    let mut s = vec![0u32; len];
    for i in ids {
        apply_masks(&mut s, &inputs[i], 1);
    }
    s
}

#[test]
fn pre_round_message_counts() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let p =
        PreRoundConfig { committee: Some(AccessStructure::single::<TinyGroup>(&[1, 2], 2).unwrap()), ..pre(3, 2, 2) };
    let net = setup::<TinyGroup>(&p, &mut rng);
    assert_eq!(net.seed_msgs.len(), 6);
    for i in 1..=3u64 {
        assert_eq!(net.seed_msgs.iter().filter(|m| m.from == i).count(), 2);
    }
    for d in net.decs.values() {
        assert_eq!(d.share_table().len(), 3);
        for (owner, entry) in d.share_table() {
            assert!(entry.self_share.is_some());
            let peers: Vec<u64> = entry.pairs.keys().copied().collect();
            let expected: Vec<u64> = (1..=3).filter(|j| j != owner).collect();
            assert_eq!(peers, expected);
        }
    }
}

#[test]
fn lone_client_deals_only_its_self_seed() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let net = setup::<TinyGroup>(&pre(1, 1, 1), &mut rng);
    assert_eq!(net.seed_msgs.len(), 1);
    let entry = &net.decs[&1].share_table()[&1];
    assert!(entry.self_share.is_some() && entry.pairs.is_empty());
}

#[test]
fn tampered_seed_share_is_rejected_and_not_stored() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let p =
        PreRoundConfig { committee: Some(AccessStructure::single::<TinyGroup>(&[1, 2], 2).unwrap()), ..pre(3, 2, 2) };
    let mut net = setup::<TinyGroup>(&p, &mut rng);
    let mut fresh = DecryptorState::new(&net.clients[&1]).unwrap();
    let mut msg = net.seed_msgs.iter().find(|m| m.to == 1 && m.from == 3).unwrap().clone();
    let last = msg.ciphertext.len() - 1;
    msg.ciphertext[last] ^= 1;
    assert_eq!(fresh.on_seed_share(&net.clients[&1], &msg), Err(Error::AeAuthFailure));
    assert!(fresh.share_table().is_empty());
    msg.ciphertext[last] ^= 1;
    fresh.on_seed_share(&net.clients[&1], &msg).unwrap();
    assert_eq!(fresh.share_table()[&3], net.decs.get_mut(&1).unwrap().share_table()[&3]);
}

fn table(entries: &[((u64, u64), u32)], len: usize) -> MaskTable {
    Arc::new(entries.iter().map(|&(k, v)| (k, vec![v; len])).collect())
}

#[test]
fn three_client_dropout_example() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let net = setup::<TinyGroup>(&pre(3, 3, 2), &mut rng);
    let mut cfg = round_cfg(3, 3, 2, 2, 1);
    cfg.eta_d = Rate::from_ppm(340_000);
    cfg.hooks.overrides = Some(table(&[((1, 1), 5), ((3, 3), 7), ((1, 2), 3), ((1, 3), 4), ((2, 3), 6)], 2));
    let inputs: BTreeMap<u64, Vec<u32>> = [(1, vec![1, 1]), (2, vec![9, 9]), (3, vec![2, 2])].into();
    let reps = reports(&net, &cfg, &inputs, &[2].into());
    assert_eq!(reps[0].y, vec![13, 13]);
    assert_eq!(reps[1].y, vec![u32::MAX, u32::MAX]);
    let (agg, round) = run(&net, &cfg, &inputs, &[2].into(), &mut rng).unwrap();
    assert_eq!((round.survivors, round.dropouts), (vec![1, 3], vec![2]));
    assert_eq!(agg.sum, vec![3, 3]);
}

#[test]
fn pairwise_masks_cancel_and_zero_masks_are_identity() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let net = setup::<TinyGroup>(&pre(2, 2, 2), &mut rng);
    let mut cfg = round_cfg(2, 2, 2, 3, 1);
    cfg.hooks.zero_self = true;
    cfg.hooks.overrides = Some(table(&[((1, 2), 9)], 3));
    let inputs: BTreeMap<u64, Vec<u32>> = [(1, vec![1, 2, 3]), (2, vec![10, 20, u32::MAX])].into();
    let reps = reports(&net, &cfg, &inputs, &BTreeSet::new());
    let mut sum = reps[0].y.clone();
    apply_masks(&mut sum, &reps[1].y, 1);
    assert_eq!(sum, vec![11, 22, 2]);

    cfg.hooks.overrides = Some(table(&[((1, 2), 0)], 3));
    let zeros: BTreeMap<u64, Vec<u32>> = [(1, vec![0; 3]), (2, vec![0; 3])].into();
    for r in reports(&net, &cfg, &zeros, &BTreeSet::new()) {
        assert_eq!(r.y, vec![0; 3]);
    }
}

#[test]
fn two_clients_exact_sum() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let net = setup::<TinyGroup>(&pre(2, 2, 1), &mut rng);
    let cfg = round_cfg(2, 2, 1, 5, 7);
    let inputs = random_inputs(2, 5, &mut rng);
    let (agg, round) = run(&net, &cfg, &inputs, &BTreeSet::new(), &mut rng).unwrap();
    assert!(round.dropouts.is_empty());
    assert_eq!(agg.sum, plain_sum(&inputs, &[1, 2], 5));
    assert!(agg.failed.is_empty());
}

#[test]
fn no_dropouts_means_only_self_seeds_in_the_response() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let net = setup::<TinyGroup>(&pre(4, 3, 2), &mut rng);
    let cfg = round_cfg(4, 3, 2, 4, 2);
    let inputs = random_inputs(4, 4, &mut rng);
    let round = net.server.collect(&cfg, &reports(&net, &cfg, &inputs, &BTreeSet::new())).unwrap();
    let layout = seed_layout(&cfg, &round.selected, &round.survivors, &round.dropouts).unwrap();
    assert_eq!(layout, vec![(1, None), (2, None), (3, None), (4, None)]);
    let responses = respond_all(&net, &cfg, &round, &mut rng);
    let opened = net.server.open_responses(&round, &responses).unwrap();
    assert!(opened.failed.is_empty());
    assert!(opened.values.values().all(|v| v.len() == 4));
}

/// Recovers `k_u` both through the decryption shares and directly from an
/// interpolated `msk`, and checks the two agree and open `c_seed`.
#[test]
fn key_recovery_matches_harness_held_msk() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let net = setup::<TinyGroup>(&pre(3, 3, 2), &mut rng);
    let cfg = round_cfg(3, 3, 2, 2, 3);
    let inputs = random_inputs(3, 2, &mut rng);
    let round = net.server.collect(&cfg, &reports(&net, &cfg, &inputs, &BTreeSet::new())).unwrap();
    let responses = respond_all(&net, &cfg, &round, &mut rng);

    let points: Vec<(u64, _)> = net.decs.values().take(2).map(|d| (d.id(), d.msk_share().unwrap().value)).collect();
    let msk = interpolate_scalar::<TinyGroup>(&points).unwrap();
    assert_eq!(TinyGroup::pow_g(&msk), *net.server.mpk().unwrap());
    let h = view_hash::<TinyGroup>(cfg.t, &round.survivors, &round.dropouts);

    for resp in &responses {
        let u = resp.from;
        let DecBody::Keyed { c_seed, c_key, .. } = &resp.body else { panic!("keyed response") };
        let sk3 = net.clients[&u].keys()[2].sk;
        let direct = TinyGroup::div(c_key, &TinyGroup::pow_g(&(msk * (sk3 + h))));
        for pair in [[0usize, 1], [0, 2], [1, 2]] {
            let others: Vec<&crate::wire::DecResp<TinyGroup>> = responses.iter().filter(|r| r.from != u).collect();
            let helpers: Vec<(u64, _)> = pair
                .iter()
                .filter_map(|&k| others.get(k))
                .map(|r| match &r.body {
                    DecBody::Keyed { dec_shares, .. } => {
                        (r.from, dec_shares.iter().find(|(to, _)| *to == u).unwrap().1)
                    }
                    _ => unreachable!(),
                })
                .collect();
            if helpers.len() < 2 {
                continue;
            }
            assert_eq!(recover_key::<TinyGroup>(c_key, &helpers).unwrap(), direct);
        }
        assert_eq!(open_seed_ciphertext::<TinyGroup>(&direct, c_seed, cfg.t, u).unwrap().len(), 3);
    }
}

#[test]
fn quorum_boundary() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let p = PreRoundConfig {
        committee: Some(AccessStructure::single::<TinyGroup>(&[1, 2, 3], 2).unwrap()),
        ..pre(10, 3, 2)
    };
    let net = setup::<TinyGroup>(&p, &mut rng);
    let cfg = round_cfg(10, 3, 2, 3, 4);
    let inputs = random_inputs(10, 3, &mut rng);
    let (agg, round) = run(&net, &cfg, &inputs, &[7].into(), &mut rng).unwrap();
    assert_eq!(round.dropouts, vec![7]);
    assert_eq!(agg.sum, plain_sum(&inputs, &round.survivors, 3));
    let err = net.server.collect(&cfg, &reports(&net, &cfg, &inputs, &[6, 7].into())).unwrap_err();
    assert!(matches!(err, Error::RoundAbort(_)));

    let strict = RoundConfig { abort_rule: AbortRule::Threshold, ..cfg.clone() };
    let few: BTreeSet<u64> = (3..=10).collect();
    assert!(net.server.collect(&strict, &reports(&net, &strict, &inputs, &few)).is_ok());
    let fewer: BTreeSet<u64> = (2..=10).collect();
    assert!(matches!(net.server.collect(&strict, &reports(&net, &strict, &inputs, &fewer)), Err(Error::RoundAbort(_))));
}

#[test]
fn forged_signature_moves_sender_to_dropouts() {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let net = setup::<TinyGroup>(&pre(5, 3, 2), &mut rng);
    let mut cfg = round_cfg(5, 3, 2, 3, 5);
    cfg.eta_d = Rate::from_ppm(200_000);
    let inputs = random_inputs(5, 3, &mut rng);
    let mut reps = reports(&net, &cfg, &inputs, &BTreeSet::new());
    let forged = reps.iter_mut().find(|r| r.id == 4).unwrap();
    rng.fill_bytes(&mut forged.sig.bytes);
    let round = net.server.collect(&cfg, &reps).unwrap();
    assert_eq!(round.dropouts, vec![4]);
    assert_eq!(round.survivors, vec![1, 2, 3, 5]);
    let responses = respond_all(&net, &cfg, &round, &mut rng);
    assert_eq!(net.server.unmask(&cfg, &round, &responses).unwrap().sum, plain_sum(&inputs, &[1, 2, 3, 5], 3));
}

#[test]
fn decryptors_reject_inconsistent_views() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let net = setup::<TinyGroup>(&pre(4, 3, 2), &mut rng);
    let cfg = round_cfg(4, 3, 2, 2, 6);
    let inputs = random_inputs(4, 2, &mut rng);
    let round = net.server.collect(&cfg, &reports(&net, &cfg, &inputs, &BTreeSet::new())).unwrap();
    let (u, d) = net.decs.iter().next().unwrap();
    let client = &net.clients[u];
    let respond = |req: &crate::wire::CheckReq| d.respond(client, &cfg, req, &mut ChaCha20Rng::seed_from_u64(0));

    let mut overlap = round.check_request();
    overlap.dropouts.push(overlap.survivors[0]);
    assert!(matches!(respond(&overlap), Err(Error::ConsistencyAbort(_))));

    let mut forged = round.check_request();
    forged.attestations[1].sig = forged.attestations[0].sig.clone();
    assert!(matches!(respond(&forged), Err(Error::ConsistencyAbort(_))));

    let mut short = round.check_request();
    short.dropouts = short.survivors.split_off(2);
    short.attestations.truncate(2);
    assert!(matches!(respond(&short), Err(Error::ConsistencyAbort(_))));

    let mut stale = round.check_request();
    stale.t += 1;
    assert!(matches!(respond(&stale), Err(Error::ConsistencyAbort(_))));
    assert!(respond(&round.check_request()).is_ok());
}

#[test]
fn config_gate() {
    let cfg = round_cfg(10, 10, 6, 4, 0);
    assert!(cfg.validate().is_ok());
    assert!(matches!(RoundConfig { threshold: 4, ..cfg.clone() }.validate(), Err(Error::InvalidConfig(_))));
    // 2·5 = 10 > 0.9·10 = 9
    assert!(RoundConfig { threshold: 5, ..cfg.clone() }.validate().is_ok());
    // with η_C = η_D the bound is exactly n_I
    let even = RoundConfig { threshold: 5, eta_c: Rate::from_ppm(100_000), ..cfg.clone() };
    assert!(even.validate().is_err());
    assert!(RoundConfig { len: 0, ..cfg.clone() }.validate().is_err());
    assert!(RoundConfig { threshold: 11, ..cfg.clone() }.validate().is_err());
    assert!(RoundConfig { selection: Selection::Static { n_t: 11 }, ..cfg }.validate().is_err());
}

#[test]
fn exact_aggregation_fifty_clients() {
    for trial in 0..20u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(100 + trial);
        let net = setup::<Bls12G1>(&pre(50, 8, 6), &mut rng);
        let mut cfg = round_cfg(50, 8, 6, 256, trial);
        cfg.digest = digest(trial, 0x5a);
        let inputs = random_inputs(50, 256, &mut rng);
        let mut ids: Vec<u64> = (1..=50).collect();
        let mut dropped = BTreeSet::new();
        while dropped.len() < 2 {
            let k = (rng.next_u32() as usize) % ids.len();
            dropped.insert(ids.swap_remove(k));
        }
        let (agg, round) = run(&net, &cfg, &inputs, &dropped, &mut rng).unwrap();
        assert_eq!(round.dropouts.len(), 2);
        assert_eq!(agg.sum, plain_sum(&inputs, &round.survivors, 256), "trial {trial}");
    }
}

#[test]
fn shares_are_reused_across_iterations() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let net = setup::<Bls12G1>(&pre(6, 4, 3), &mut rng);
    let mut self_masks: Vec<Vec<u32>> = Vec::new();
    for t in 0..20u64 {
        let cfg = round_cfg(6, 4, 3, 16, t);
        let inputs = random_inputs(6, 16, &mut rng);
        let dropped: BTreeSet<u64> = if t % 2 == 0 { BTreeSet::new() } else { [1 + t % 6].into() };
        let mut cfg = cfg;
        cfg.eta_d = Rate::from_ppm(200_000);
        let (agg, round) = run(&net, &cfg, &inputs, &dropped, &mut rng).unwrap();
        assert_eq!(agg.sum, plain_sum(&inputs, &round.survivors, 16));
        self_masks.push(net.clients[&1].self_mask(&cfg).unwrap());
    }
    let distinct: BTreeSet<&Vec<u32>> = self_masks.iter().collect();
    assert_eq!(distinct.len(), 20);
}

fn subsets(items: &[u64], k: usize) -> Vec<Vec<u64>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out: Vec<Vec<u64>> = subsets(&items[1..], k - 1)
        .into_iter()
        .map(|mut s| {
            s.insert(0, items[0]);
            s
        })
        .collect();
    out.extend(subsets(&items[1..], k));
    out
}

/// Two halves of the committee answer different views; no helper set opens any key.
#[test]
fn split_views_never_open() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let gamma = AccessStructure::single::<Bls12G1>(&[1, 2, 3, 4, 5, 6], 4).unwrap();
    let net = setup::<Bls12G1>(&PreRoundConfig { committee: Some(gamma), ..pre(8, 6, 4) }, &mut rng);
    let mut cfg = round_cfg(8, 6, 4, 8, 1);
    cfg.eta_d = Rate::from_ppm(200_000);
    let inputs = random_inputs(8, 8, &mut rng);
    let full = reports(&net, &cfg, &inputs, &BTreeSet::new());
    let view_a = net.server.collect(&cfg, &full).unwrap();
    let view_b = net.server.collect(&cfg, &full[..7]).unwrap();
    assert_eq!(view_b.dropouts, vec![8]);

    let responses: Vec<_> = net
        .decs
        .iter()
        .map(|(&u, d)| {
            let view = if u <= 3 { &view_a } else { &view_b };
            d.respond(&net.clients[&u], &cfg, &view.check_request(), &mut rng).unwrap()
        })
        .collect();
    let share = |from: u64, to: u64| match &responses[from as usize - 1].body {
        DecBody::Keyed { dec_shares, .. } => dec_shares.iter().find(|(i, _)| *i == to).unwrap().1,
        _ => unreachable!(),
    };
    for resp in &responses {
        let u = resp.from;
        let DecBody::Keyed { c_seed, c_key, .. } = &resp.body else { unreachable!() };
        let others: Vec<u64> = (1..=6).filter(|&i| i != u).collect();
        for helpers in subsets(&others, 4) {
            let pairs: Vec<(u64, _)> = helpers.iter().map(|&i| (i, share(i, u))).collect();
            let k_u = recover_key::<Bls12G1>(c_key, &pairs).unwrap();
            assert_eq!(open_seed_ciphertext::<Bls12G1>(&k_u, c_seed, cfg.t, u), Err(Error::AeAuthFailure));
        }
    }
    for view in [&view_a, &view_b] {
        let opened = net.server.open_responses(view, &responses).unwrap();
        assert!(opened.values.is_empty());
        assert!(matches!(net.server.unmask(&cfg, view, &responses), Err(Error::RoundAbort(_))));
    }
}

/// Chi-square on the top nibble of each entry of one client's report, with self
/// masks disabled, while the survivor sum stays exact.
#[test]
fn masked_reports_look_uniform() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let net = setup::<Bls12G1>(&pre(3, 3, 2), &mut rng);
    let inputs: BTreeMap<u64, Vec<u32>> = (1..=3).map(|i| (i, vec![i as u32 * 1000; 8])).collect();
    let mut buckets = [0u64; 16];
    for t in 0..1000u64 {
        let mut cfg = round_cfg(3, 3, 2, 8, t);
        cfg.hooks.zero_self = true;
        let reps = reports(&net, &cfg, &inputs, &BTreeSet::new());
        let mut sum = vec![0u32; 8];
        for r in &reps {
            apply_masks(&mut sum, &r.y, 1);
        }
        assert_eq!(sum, vec![6000; 8]);
        for v in &reps[0].y {
            buckets[(v >> 28) as usize] += 1;
        }
    }
    let expected = 8000.0 / 16.0;
    let chi2: f64 = buckets.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
    // 15 degrees of freedom, p = 0.001
    assert!(chi2 < 37.7, "chi-square {chi2}");
}

#[test]
fn joined_decryptors_take_part_in_unmasking() {
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let gamma = AccessStructure::single::<TinyGroup>(&[1, 2, 3], 2).unwrap();
    let p = PreRoundConfig { committee: Some(gamma), retain_dealers: true, ..pre(6, 3, 2) };
    let mut net = setup::<TinyGroup>(&p, &mut rng);
    let level = JoinLevel { members: vec![4, 5], threshold: 4 };
    let mut msgs = Vec::new();
    for c in net.clients.values_mut() {
        msgs.extend(c.extend_decryptors(&level, &mut rng).unwrap());
    }
    assert!(msgs.iter().all(|m| m.to == 4 || m.to == 5));
    assert_eq!(msgs.len(), 12);
    net.server.apply_join_level(&level).unwrap();
    for d in net.decs.values_mut() {
        d.apply_join_level(&level).unwrap();
    }
    for u in [4u64, 5] {
        let mut d = DecryptorState::joined(
            &net.clients[&u],
            *net.server.mpk().unwrap(),
            net.server.aggregated_commitments().to_vec(),
            net.server.verify_keys().clone(),
        )
        .unwrap();
        for m in msgs.iter().filter(|m| m.to == u) {
            d.on_seed_share(&net.clients[&u], m).unwrap();
        }
        assert!(d.msk_share().is_none());
        net.decs.insert(u, d);
    }
    let mut cfg = round_cfg(6, 5, 2, 4, 9);
    cfg.eta_d = Rate::from_ppm(200_000);
    let inputs = random_inputs(6, 4, &mut rng);
    let round = net.server.collect(&cfg, &reports(&net, &cfg, &inputs, &[2].into())).unwrap();

    // level-1 decryptors 2 and 3 stay silent: quorum {1, 4, 5} needs k_1 opened by 2 msk holders
    let all = respond_all(&net, &cfg, &round, &mut rng);
    let partial: Vec<_> = all.iter().filter(|r| [1, 4, 5].contains(&r.from)).cloned().collect();
    let opened = net.server.open_responses(&round, &partial).unwrap();
    assert!(opened.values.is_empty());

    let opened = net.server.open_responses(&round, &all).unwrap();
    assert_eq!(opened.values.len(), 5);
    let agg = net.server.unmask(&cfg, &round, &all).unwrap();
    assert_eq!(agg.sum, plain_sum(&inputs, &round.survivors, 4));
}

fn tss_round(
    net: &Net<TinyGroup>,
    cfg: &RoundConfig,
    round: &RoundState,
    views: &BTreeMap<u64, crate::wire::CheckReq>,
) -> Result<Vec<crate::wire::DecResp<TinyGroup>>> {
    use crate::tss::{decryptor_tss_finish, decryptor_tss_part, server_crosscheck_alt};
    let parts: Vec<_> =
        net.decs.iter().map(|(u, d)| decryptor_tss_part(d, &net.clients[u], cfg, &views[u])).collect::<Result<_>>()?;
    let full = server_crosscheck_alt(&net.server, round, &parts)?;
    net.decs.iter().map(|(u, d)| decryptor_tss_finish(d, &net.clients[u], cfg, &views[u], &full)).collect()
}

#[test]
fn tss_mode_end_to_end() {
    let mut rng = ChaCha20Rng::seed_from_u64(16);
    let p = PreRoundConfig {
        committee: Some(AccessStructure::single::<TinyGroup>(&[1, 2, 3, 4, 5, 6], 4).unwrap()),
        ..pre(8, 6, 4)
    };
    let net = setup::<TinyGroup>(&p, &mut rng);
    let mut cfg = round_cfg(8, 6, 4, 6, 3);
    cfg.mode = Mode::Tss;
    cfg.eta_d = Rate::from_ppm(200_000);
    let inputs = random_inputs(8, 6, &mut rng);
    let round = net.server.collect(&cfg, &reports(&net, &cfg, &inputs, &[5].into())).unwrap();
    let views: BTreeMap<u64, _> = net.decs.keys().map(|&u| (u, round.check_request())).collect();
    let responses = tss_round(&net, &cfg, &round, &views).unwrap();
    assert!(responses.iter().all(|r| matches!(r.body, DecBody::Plain { .. })));
    let agg = net.server.unmask(&cfg, &round, &responses).unwrap();
    assert_eq!(agg.sum, plain_sum(&inputs, &round.survivors, 6));

    // one decryptor is shown a different survivor set
    let other = net.server.collect(&cfg, &reports(&net, &cfg, &inputs, &[4].into())).unwrap();
    let mut split = views.clone();
    split.insert(6, other.check_request());
    assert!(matches!(tss_round(&net, &cfg, &round, &split), Err(Error::CombineReject(6))));
}

#[test]
fn tss_needs_threshold_participants() {
    use crate::tss::{decryptor_tss_part, server_crosscheck_alt};
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let p = PreRoundConfig {
        committee: Some(AccessStructure::single::<TinyGroup>(&[1, 2, 3, 4], 3).unwrap()),
        ..pre(5, 4, 3)
    };
    let net = setup::<TinyGroup>(&p, &mut rng);
    let cfg = RoundConfig { mode: Mode::Tss, ..round_cfg(5, 4, 3, 2, 1) };
    let inputs = random_inputs(5, 2, &mut rng);
    let round = net.server.collect(&cfg, &reports(&net, &cfg, &inputs, &BTreeSet::new())).unwrap();
    let parts: Vec<_> = [1u64, 2]
        .iter()
        .map(|u| decryptor_tss_part(&net.decs[u], &net.clients[u], &cfg, &round.check_request()).unwrap())
        .collect();
    assert_eq!(server_crosscheck_alt(&net.server, &round, &parts), Err(Error::InsufficientShares { have: 2, need: 3 }));
}
