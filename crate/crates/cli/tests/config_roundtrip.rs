use attractor_forge::drift::DriftFamily;
use attractor_forge_cli::config::{
    DriftBlock, ExperimentConfig, ExperimentKind, GridBlock, InitialField, KindBlock, NoiseBlock,
    NoiseKindName, PullbackBlock, SolverBlock, TripleBlock,
};
use attractor_forge::noise::AmplitudeLaw;
use attractor_forge_cli::parse_config;
use proptest::prelude::*;

fn family() -> impl Strategy<Value = DriftFamily> {
    prop_oneof![
        (2.0f64..6.0, -1.0f64..1.0).prop_map(|(p, eta)| DriftFamily::Pointwise { p, eta }),
        (2.0f64..6.0, -1.0f64..1.0).prop_map(|(p, eta)| DriftFamily::Rde { p, eta }),
        (1.1f64..5.0, -1.0f64..1.0).prop_map(|(r, eta)| DriftFamily::Pme { r, eta }),
        (2.1f64..5.0, 1.5f64..2.0, 0.0f64..1.0, -1.0f64..1.0)
            .prop_map(|(p, p_tilde, eta1, eta2)| DriftFamily::Ple { p, p_tilde, eta1, eta2 }),
    ]
}

fn noise() -> impl Strategy<Value = NoiseBlock> {
    (
        prop_oneof![
            Just(NoiseKindName::Zero),
            Just(NoiseKindName::QWiener),
            Just(NoiseKindName::Fbm),
            Just(NoiseKindName::Levy)
        ],
        1e-4f64..0.1,
        -100.0f64..0.0,
        0.0f64..10.0,
        (0.1f64..2.0, 6.0f64..10.0, 0usize..16, 0.05f64..0.95),
        (prop::collection::vec(-1.0f64..1.0, 0..4), 0.0f64..5.0, 1usize..8, -1.0f64..1.0),
    )
        .prop_map(|(kind, dt, t_start, t_end, (c, q, modes, hurst), (drift, rate, mode, amp))| {
            let mut b = NoiseBlock {
                kind,
                dt,
                t_start,
                t_end,
                weight_scale: 1.0,
                weight_decay: 8.0,
                modes: 8,
                hurst: 0.5,
                levy_drift: Vec::new(),
                jump_rate: 0.0,
                jump_mode: 1,
                amplitude: AmplitudeLaw::Constant(0.0),
            };
            if kind != NoiseKindName::Zero {
                b.weight_scale = c;
                b.weight_decay = q;
                b.modes = modes;
            }
            if kind == NoiseKindName::Fbm {
                b.hurst = hurst;
            }
            if kind == NoiseKindName::Levy {
                b.levy_drift = drift;
                b.jump_rate = rate;
                b.jump_mode = mode;
                b.amplitude = AmplitudeLaw::Normal { mean: amp, std: rate };
            }
            b
        })
}

fn initial() -> impl Strategy<Value = InitialField> {
    prop_oneof![
        Just(InitialField::Zero),
        (-5.0f64..5.0).prop_map(InitialField::Constant),
        (-5.0f64..5.0, 1usize..10).prop_map(|(amplitude, mode)| InitialField::Sine { amplitude, mode }),
        (0.0f64..5.0).prop_map(|amplitude| InitialField::Random { amplitude }),
    ]
}

prop_compose! {
    fn pullback_config()(
        seed in any::<u64>(),
        n in 2usize..300,
        length in 0.1f64..10.0,
        family in family(),
        lambda_scale in 0.5f64..3.0,
        noise in noise(),
        solver in (1e-4f64..0.1, 1e-14f64..1e-6, 1usize..100, 0usize..12, 0.1f64..1.0),
        s_list in prop::collection::vec(-100.0f64..0.0, 1..6),
        eval_time in -1.0f64..1.0,
        bundle_size in 1usize..20,
        bundle_radius in 0.1f64..5.0,
        save_noise in any::<bool>(),
        _init in initial(),
    ) -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::Pullback,
            seed,
            output: format!("runs/out-{seed}"),
            save_noise,
            grid: GridBlock { n, length },
            drift: Some(DriftBlock { family, lambda_scale }),
            triple: TripleBlock { kind: None },
            noise,
            solver: SolverBlock {
                dt: solver.0,
                newton_tol: solver.1,
                newton_max_iters: solver.2,
                step_halving_max: solver.3,
                damping: solver.4,
            },
            block: KindBlock::Pullback(PullbackBlock { s_list, eval_time, bundle_size, bundle_radius }),
        }
    }
}

proptest! {
    #[test]
    fn pullback_config_roundtrips(cfg in pullback_config()) {
        let text = cfg.to_text();
        let back = parse_config(&text, None).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn initial_field_text_roundtrips(init in initial()) {
        let cfg = format!("[grid]\nn = 4\n[drift]\nfamily = rde\np = 2\n[simulate]\ninitial = {}\n", text_of(&init));
        let parsed = parse_config(&cfg, Some(ExperimentKind::Simulate)).unwrap();
        match parsed.block {
            KindBlock::Simulate(s) => prop_assert_eq!(s.initial, init),
            other => prop_assert!(false, "unexpected block {:?}", other),
        }
    }
}

fn text_of(init: &InitialField) -> String {
    match *init {
        InitialField::Zero => "zero".into(),
        InitialField::Constant(c) => format!("const:{c}"),
        InitialField::Sine { amplitude, mode } => format!("sine:{amplitude}:{mode}"),
        InitialField::Random { amplitude } => format!("random:{amplitude}"),
    }
}
