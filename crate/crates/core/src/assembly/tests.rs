use super::*;
use crate::linalg::symmetric_eigen;
use crate::mesh::{structured_mesh, BoundaryTags, FractureDirection, LatticeFracture, Rect};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn unit_grid(n: usize, fractures: &[LatticeFracture]) -> FineMesh {
    structured_mesh(Rect::new(0.0, 0.0, 1.0, 1.0), n, n, fractures).unwrap()
}

fn min_eig(m: &CsrMatrix) -> f64 {
    let n = m.nrows();
    let dense: Vec<f64> = m.to_dense().into_iter().flatten().collect();
    symmetric_eigen(n, &dense).unwrap().0[0]
}

fn model_one(mesh: &FineMesh, c: f64, k: f64, gamma: f64) -> PoroModel {
    PoroModel {
        continua: vec![ContinuumSpec::bulk(
            "m",
            c,
            vec![k; mesh.triangle_count()],
            gamma,
        )],
        exchanges: vec![],
        elasticity: ElasticitySpec {
            young: vec![1.0; mesh.triangle_count()],
            poisson: 0.3,
        },
    }
}

#[test]
fn right_triangle_local_matrices() {
    let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let k = element_stiffness(p, 1.0);
    let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    for a in 0..3 {
        for b in 0..3 {
            assert!(close(k[a][b], expect[a][b], 1e-15));
        }
    }
    let m = element_mass(0.5, 1.0);
    for a in 0..3 {
        for b in 0..3 {
            let e = if a == b { 2.0 / 24.0 } else { 1.0 / 24.0 };
            assert!(close(m[a][b], e, 1e-16));
        }
    }
}

#[test]
fn stiffness_kernel_and_linearity() {
    let mesh = unit_grid(5, &[]);
    let k: Vec<f64> = (0..mesh.triangle_count())
        .map(|t| 1.0 + t as f64 * 0.1)
        .collect();
    let spec = ContinuumSpec::bulk("m", 0.1, k.clone(), 0.1);
    let a = assemble_stiffness(&spec, &mesh).unwrap();
    assert!(a
        .mul_vec(&vec![1.0; mesh.node_count()])
        .iter()
        .all(|v| v.abs() < 1e-12));
    let spec10 = ContinuumSpec::bulk("m", 0.1, k.iter().map(|v| 10.0 * v).collect(), 0.1);
    let a10 = assemble_stiffness(&spec10, &mesh).unwrap();
    for ((_, _, x), (_, _, y)) in a.iter().zip(a10.iter()) {
        assert!(close(10.0 * x, y, 1e-12 * y.abs().max(1.0)));
    }
    let bad = ContinuumSpec::bulk("m", 0.1, vec![0.0; mesh.triangle_count()], 0.1);
    assert!(matches!(
        assemble_stiffness(&bad, &mesh),
        Err(Error::Data(_))
    ));
}

#[test]
fn fracture_stiffness_examples() {
    let mesh = structured_mesh(
        Rect::new(0.0, 0.0, 2.0, 2.0),
        2,
        2,
        &[LatticeFracture::new(
            [0, 1],
            FractureDirection::Horizontal,
            2,
        )],
    )
    .unwrap();
    let spec = ContinuumSpec::fracture("f", 1e-3, vec![1.0; 2]);
    let a = assemble_fracture_stiffness(&spec, &mesh)
        .unwrap()
        .to_dense();
    assert_eq!(
        a,
        vec![
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0]
        ]
    );

    let h = 0.25;
    let one = structured_mesh(
        Rect::new(0.0, 0.0, 1.0, 1.0),
        4,
        4,
        &[LatticeFracture::new([1, 1], FractureDirection::Vertical, 1)],
    )
    .unwrap();
    let a = assemble_fracture_stiffness(&ContinuumSpec::fracture("f", 0.0, vec![1.0]), &one)
        .unwrap()
        .to_dense();
    assert!(close(a[0][0], 1.0 / h, 1e-12) && close(a[0][1], -1.0 / h, 1e-12));

    let none = unit_grid(2, &[]);
    let a = assemble_fracture_stiffness(&ContinuumSpec::fracture("f", 0.0, vec![]), &none).unwrap();
    assert_eq!((a.nrows(), a.ncols()), (0, 0));
}

#[test]
fn mass_totals() {
    let mesh = unit_grid(4, &[]);
    let m = assemble_mass(
        &ContinuumSpec::bulk("m", 0.1, vec![1.0; mesh.triangle_count()], 0.0),
        &mesh,
    )
    .unwrap();
    let ones = vec![1.0; mesh.node_count()];
    assert!(close(m.quadratic_form(&ones), 0.1, 1e-14));
    assert!(min_eig(&m) > 0.0);
    let z = assemble_mass(
        &ContinuumSpec::bulk("m", 0.0, vec![1.0; mesh.triangle_count()], 0.0),
        &mesh,
    )
    .unwrap();
    assert_eq!(z.max_abs(), 0.0);
    assert!(matches!(
        assemble_mass(
            &ContinuumSpec::bulk("m", -1.0, vec![1.0; mesh.triangle_count()], 0.0),
            &mesh
        ),
        Err(Error::Data(_))
    ));
}

#[test]
fn exchange_examples() {
    let mesh = structured_mesh(
        Rect::new(0.0, 0.0, 1.0, 1.0),
        1,
        1,
        &[LatticeFracture::new(
            [0, 0],
            FractureDirection::Horizontal,
            1,
        )],
    )
    .unwrap();
    let nt = mesh.triangle_count();
    let mut model = PoroModel {
        continua: vec![
            ContinuumSpec::bulk("m", 0.1, vec![1.0; nt], 0.1),
            ContinuumSpec::bulk("n", 0.1, vec![1.0; nt], 0.1),
            ContinuumSpec::fracture("f", 0.1, vec![1.0]),
        ],
        exchanges: vec![
            ExchangeSpec::new(0, 1, vec![1.0; nt]),
            ExchangeSpec::new(0, 2, vec![1.0]),
        ],
        elasticity: ElasticitySpec {
            young: vec![1.0; nt],
            poisson: 0.3,
        },
    };
    let bb = assemble_exchange(&model, &model.exchanges[0].clone(), &mesh).unwrap();
    let plain = assemble_weighted_mass(
        &mesh,
        &vec![1.0; nt],
        Elements {
            triangles: &[0, 1],
            fracture_edges: &[],
        },
    );
    assert_eq!(bb.cross, plain);
    assert_eq!(bb.diag_first, plain);

    let bf = assemble_exchange(&model, &model.exchanges[1].clone(), &mesh).unwrap();
    let e = vec![vec![2.0 / 6.0, 1.0 / 6.0], vec![1.0 / 6.0, 2.0 / 6.0]];
    assert_eq!(bf.diag_second.to_dense(), e);
    let trace = bf.diag_first.to_dense();
    let cross = bf.cross.to_dense();
    for a in 0..2 {
        for b in 0..2 {
            assert!(close(trace[a][b], e[a][b], 1e-15));
            assert!(close(cross[a][b], e[a][b], 1e-15));
        }
    }
    assert_eq!(bf.diag_first.nnz(), 4);

    model.exchanges[1].eta = vec![0.0];
    let zero = assemble_exchange(&model, &model.exchanges[1].clone(), &mesh).unwrap();
    assert_eq!(zero.cross.max_abs(), 0.0);

    model.continua[1] = ContinuumSpec::fracture("g", 0.1, vec![1.0]);
    let ff = ExchangeSpec::new(1, 2, vec![1.0]);
    assert!(matches!(
        exchange_on(
            &model,
            &ff,
            &mesh,
            Elements {
                triangles: &[],
                fracture_edges: &[0]
            }
        ),
        Err(Error::Contract(_))
    ));
}

#[test]
fn coupling_examples() {
    let mesh = unit_grid(3, &[]);
    let n = mesh.node_count();
    let spec = ContinuumSpec::bulk("m", 0.1, vec![1.0; mesh.triangle_count()], 1.0);
    let d = assemble_coupling(&spec, &mesh);
    assert_eq!((d.nrows(), d.ncols()), (n, 2 * n));
    let translation: Vec<f64> = (0..n).flat_map(|_| [1.0, 0.0]).collect();
    assert!(d.mul_vec(&translation).iter().all(|v| v.abs() < 1e-14));
    let dilation: Vec<f64> = mesh.nodes().iter().flat_map(|p| [p[0], p[1]]).collect();
    let total: f64 = d.mul_vec(&dilation).iter().sum();
    assert!(close(total, 2.0, 1e-13));
    let zero = assemble_coupling(
        &ContinuumSpec::bulk("m", 0.1, vec![1.0; mesh.triangle_count()], 0.0),
        &mesh,
    );
    assert_eq!(zero.nnz(), 0);
}

#[test]
fn elasticity_rigid_kernel_and_lame() {
    let (l, m) = lame(1.0, 0.3);
    assert!(close(l, 0.576_923_1, 1e-7) && close(m, 0.384_615_4, 1e-7));
    let mesh = unit_grid(4, &[]);
    let el = ElasticitySpec {
        young: (0..mesh.triangle_count())
            .map(|t| 1.0 + (t % 5) as f64)
            .collect(),
        poisson: 0.3,
    };
    let a = assemble_elasticity(&el, &mesh).unwrap();
    for mode in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let v: Vec<f64> = mesh
            .nodes()
            .iter()
            .flat_map(|p| [mode[0] - mode[2] * p[1], mode[1] + mode[2] * p[0]])
            .collect();
        assert!(a.mul_vec(&v).iter().all(|r| r.abs() < 1e-13));
    }
    assert!(min_eig(&a) > -1e-12);
    let bad = ElasticitySpec {
        young: el.young.clone(),
        poisson: 0.5,
    };
    assert!(matches!(
        assemble_elasticity(&bad, &mesh),
        Err(Error::Data(_))
    ));
}

#[test]
fn boundary_conditions_make_blocks_definite() {
    let mesh = unit_grid(3, &[]);
    let model = model_one(&mesh, 0.0, 1.0, 0.1);
    let layout = DofLayout::new(&mesh, &model.continua);
    let sys = assemble_system(&model, &mesh).unwrap();

    let spec = BoundarySpec {
        pressure: vec![],
        displacement: BoundarySpec::roller(),
    };
    let cons = apply_boundary_conditions(&model, &layout, &mesh, &spec).unwrap();
    check_rigid_modes(&mesh, &layout, &cons).unwrap();
    let ucons = Constraints::new(
        layout.displacement_size(),
        cons.dofs()
            .iter()
            .filter(|&&d| d >= layout.displacement_offset())
            .map(|&d| (d - layout.displacement_offset(), 0.0))
            .collect(),
    )
    .unwrap();
    assert!(min_eig(&ucons.reduce(&sys.elasticity).0) > 1e-8);

    // c = 0 and no pressure Dirichlet: singular flow block
    assert!(matches!(
        check_flow_solvable(&model, &layout, &cons),
        Err(Error::Config(_))
    ));

    let spec = BoundarySpec {
        pressure: vec![PressureDirichlet {
            continuum: 0,
            sides: BoundaryTags::LEFT,
            value: 0.0,
        }],
        displacement: BoundarySpec::roller(),
    };
    let cons = apply_boundary_conditions(&model, &layout, &mesh, &spec).unwrap();
    check_flow_solvable(&model, &layout, &cons).unwrap();
    let pcons = Constraints::new(
        mesh.node_count(),
        cons.dofs()
            .iter()
            .filter(|&&d| d < mesh.node_count())
            .map(|&d| (d, 0.0))
            .collect(),
    )
    .unwrap();
    assert_eq!(pcons.dofs().len(), 4);
    assert!(min_eig(&pcons.reduce(&sys.stiffness[0]).0) > 1e-8);

    let only_x = BoundarySpec {
        pressure: vec![],
        displacement: vec![DisplacementDirichlet {
            sides: BoundaryTags::LEFT,
            components: [true, false],
            value: [0.0; 2],
        }],
    };
    let cons = apply_boundary_conditions(&model, &layout, &mesh, &only_x).unwrap();
    assert!(matches!(
        check_rigid_modes(&mesh, &layout, &cons),
        Err(Error::Config(_))
    ));

    let frac_model = PoroModel {
        continua: vec![
            model.continua[0].clone(),
            ContinuumSpec::fracture("f", 1.0, vec![]),
        ],
        ..model.clone()
    };
    let layout2 = DofLayout::new(&mesh, &frac_model.continua);
    let untagged = BoundarySpec {
        pressure: vec![PressureDirichlet {
            continuum: 1,
            sides: BoundaryTags::LEFT,
            value: 0.0,
        }],
        displacement: vec![],
    };
    assert!(matches!(
        apply_boundary_conditions(&frac_model, &layout2, &mesh, &untagged),
        Err(Error::Config(_))
    ));
}

#[test]
fn manufactured_source_integrals() {
    let mesh = unit_grid(4, &[]);
    assert!(assemble_manufactured_source(&mesh, |_| 0.0)
        .iter()
        .all(|&v| v == 0.0));
    let one: f64 = assemble_manufactured_source(&mesh, |_| 1.0).iter().sum();
    assert!(close(one, 1.0, 1e-14));
    let x: f64 = assemble_manufactured_source(&mesh, |p| p[0]).iter().sum();
    assert!(close(x, 0.5, 1e-14));
    // degree 2 is integrated exactly: ∫ x y = 1/4
    let xy: f64 = assemble_manufactured_source(&mesh, |p| p[0] * p[1])
        .iter()
        .sum();
    assert!(close(xy, 0.25, 1e-14));
}

#[test]
fn p1_reproduces_linear_poisson_solution() {
    let mesh = unit_grid(8, &[]);
    let k = vec![3.0; mesh.triangle_count()];
    let a = assemble_scalar_stiffness(
        &mesh,
        &k,
        Elements {
            triangles: &(0..mesh.triangle_count()).collect::<Vec<_>>(),
            fracture_edges: &[],
        },
    );
    let exact: Vec<f64> = mesh
        .nodes()
        .iter()
        .map(|p| 0.3 + 2.0 * p[0] - 1.5 * p[1])
        .collect();
    let bnd: Vec<(usize, f64)> = (0..mesh.node_count())
        .filter(|&v| !mesh.boundary_tags(v).is_empty())
        .map(|v| (v, exact[v]))
        .collect();
    let cons = Constraints::new(mesh.node_count(), bnd).unwrap();
    let (kff, kfc) = cons.reduce(&a);
    let lift = kfc.mul_vec(cons.values());
    let rhs: Vec<f64> = lift.iter().map(|v| -v).collect();
    let (x, _) = crate::linalg::SparseLu::new(kff)
        .unwrap()
        .solve(&rhs)
        .unwrap();
    let full = cons.expand(&x, cons.values());
    for (u, e) in full.iter().zip(&exact) {
        assert!(close(*u, *e, 1e-10));
    }
}

#[test]
fn coupled_flow_annihilates_common_constants() {
    let mesh = unit_grid(
        3,
        &[LatticeFracture::new([0, 1], FractureDirection::Diagonal, 2)],
    );
    let nt = mesh.triangle_count();
    let model = PoroModel {
        continua: vec![
            ContinuumSpec::bulk("m", 0.1, vec![1.0; nt], 0.1),
            ContinuumSpec::fracture("f", 0.1, vec![5.0; 2]),
        ],
        exchanges: vec![ExchangeSpec::new(0, 1, vec![3.0; 2])],
        elasticity: ElasticitySpec {
            young: vec![1.0; nt],
            poisson: 0.3,
        },
    };
    let sys = assemble_system(&model, &mesh).unwrap();
    let a = sys.coupled_flow();
    assert!(a.is_symmetric(1e-14));
    let r = a.mul_vec(&vec![2.5; sys.layout.pressure_total()]);
    assert!(r.iter().all(|v| v.abs() < 1e-13));
    assert!(min_eig(&a) > -1e-12);
}
