#!/usr/bin/env python3
"""Regenerates the bundled fixtures. Output is deterministic (fixed seed)."""

import csv
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
STORE_HEADER = ["suite", "workload", "machine", "event", "value", "supported"]
SCORES_HEADER = ["suite", "workload", "machine", "score", "wallclock_seconds"]

# workload, icount (billions), loads %, stores %, branches %, ipc
TABLE1 = {
    "int_rate": [
        ("706.stockfish_r", 6507, 22.0, 9.9, 10.4, 3.625),
        ("707.ntest_r", 2507, 25.0, 9.6, 9.2, 3.268),
        ("708.sqlite_r", 1716, 26.9, 11.9, 20.9, 2.228),
        ("710.omnetpp_r", 1583, 31.9, 17.5, 20.5, 2.103),
        ("714.cpython_r", 1475, 27.9, 15.8, 21.4, 2.843),
        ("721.gcc_r", 1503, 28.0, 11.3, 21.8, 0.551),
        ("723.llvm_r", 1534, 26.0, 13.7, 20.8, 1.484),
        ("727.cppcheck_r", 1286, 22.5, 9.6, 26.7, 2.228),
        ("729.abc_r", 1400, 26.2, 8.9, 16.7, 2.187),
        ("734.vpr_r", 1367, 30.9, 11.2, 19.2, 2.097),
        ("735.gem5_r", 1659, 30.2, 14.7, 20.9, 2.068),
        ("750.sealcrypto_r", 3087, 12.0, 4.7, 1.9, 4.961),
        ("753.ns3_r", 1432, 29.4, 16.8, 22.2, 2.230),
        ("777.zstd_r", 1817, 22.2, 9.0, 13.3, 1.911),
    ],
    "int_speed": [
        ("801.xz_s", 17757, 22.2, 7.4, 14.4, 1.008),
        ("807.ntest_s", 151005, 20.8, 7.8, 6.7, 3.460),
        ("817.flac_s", 90970, 17.6, 2.3, 4.4, 4.156),
        ("821.gcc_s", 109486, 26.8, 12.5, 21.7, 2.016),
        ("823.llvm_s", 103105, 22.0, 11.8, 23.1, 1.896),
        ("827.cppcheck_s", 90423, 23.0, 11.2, 26.5, 2.375),
        ("829.abc_s", 1433, 25.1, 11.7, 18.1, 0.858),
        ("834.vpr_s", 3117, 30.7, 11.1, 19.4, 1.863),
        ("835.gem5_s", 2858, 29.4, 13.5, 17.6, 1.805),
        ("838.diamond_s", 146966, 20.1, 6.8, 5.5, 3.203),
        ("846.minizinc_s", 5062, 26.5, 18.2, 15.9, 1.228),
        ("853.ns3_s", 11053, 28.9, 14.3, 21.0, 1.662),
        ("854.graph500_s", 37168, 36.2, 0.9, 25.7, 1.539),
    ],
    "fp_rate": [
        ("709.cactus_r", 1456, 51.9, 7.9, 1.1, 1.696),
        ("722.palm_r", 3272, 39.0, 9.1, 5.0, 3.187),
        ("731.astcenc_r", 2615, 28.3, 6.5, 8.7, 2.718),
        ("736.ocio_r", 2484, 24.2, 7.5, 9.8, 3.269),
        ("737.gmsh_r", 1086, 29.2, 12.1, 17.2, 1.585),
        ("748.flightdm_r", 1721, 29.5, 14.2, 18.8, 3.071),
        ("749.fotonik3d_r", 1291, 36.8, 13.7, 1.8, 0.785),
        ("765.roms_r", 2738, 34.8, 8.4, 7.3, 1.830),
        ("766.femflow_r", 5012, 34.9, 20.1, 6.9, 3.265),
        ("767.nest_r", 1848, 33.5, 12.3, 14.0, 2.844),
        ("772.marian_r", 6389, 8.7, 1.3, 3.0, 3.953),
        ("782.lbm_r", 2236, 21.2, 10.9, 0.7, 1.241),
    ],
    "fp_speed": [
        ("800.pot3d_s", 7603, 34.8, 8.1, 9.5, 0.754),
        ("803.sph_exa_s", 64626, 24.8, 3.4, 11.2, 2.465),
        ("809.cactus_s", 29190, 51.9, 8.1, 1.6, 1.338),
        ("811.tealeaf_s", 40570, 20.2, 4.9, 8.8, 1.617),
        ("816.nab_s", 67717, 31.2, 5.7, 11.9, 2.441),
        ("820.cloverleaf_s", 25781, 33.2, 4.7, 5.9, 1.349),
        ("822.palm_s", 48883, 38.2, 8.9, 6.4, 1.920),
        ("849.fotonik3d_s", 17777, 56.0, 9.8, 2.7, 0.955),
        ("857.namd_s", 168881, 26.4, 6.6, 2.2, 3.929),
        ("865.roms_s", 28484, 34.7, 8.6, 7.9, 1.574),
        ("867.nest_s", 66774, 30.1, 9.3, 14.7, 1.790),
        ("872.marian_s", 65980, 10.8, 2.8, 3.8, 3.258),
        ("881.neutron_s", 33545, 25.8, 11.3, 9.1, 1.204),
    ],
}


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def table1():
    rows = []
    for suite, entries in TABLE1.items():
        for name, icount, loads, stores, branches, ipc in entries:
            instr = icount * 10**9
            counts = {
                "instructions": instr,
                "cycles": round(instr / ipc),
                "loads": round(instr * loads / 100),
                "stores": round(instr * stores / 100),
                "branches": round(instr * branches / 100),
            }
            for event, value in sorted(counts.items()):
                rows.append([suite, name, "CPU-C", event, value, "true"])
    rows.sort()
    write_csv(os.path.join(HERE, "table1", "store.csv"), STORE_HEADER, rows)


MACHINES = {
    # frequency, per-event multipliers applied to every workload
    "CPU-A": (3.0e9, {"l2_misses": 1.3, "l3_misses": 0.8, "l2_tlb_misses": 1.1}),
    "CPU-B": (2.5e9, {"l1i_misses": 1.2, "branch_misses": 0.9, "backend_stall_cycles": 1.1}),
    "CPU-C": (3.5e9, {"l3_misses": 1.2, "l1_dtlb_misses": 0.85}),
}

# per-kilo-instruction event densities and IPC for the cluster centres
CENTRES = [
    dict(ipc=3.4, l1i=0.5, l1d=8.0, l2=2.0, l3=0.2, itlb=20.0, dtlb=40.0, stlb=5.0, br=1.0,
         fe=0.05, be=0.15, loads=220, stores=90, branches=100, fp=5, vec=60),
    dict(ipc=2.1, l1i=12.0, l1d=25.0, l2=9.0, l3=1.5, itlb=900.0, dtlb=300.0, stlb=120.0, br=4.0,
         fe=0.30, be=0.25, loads=280, stores=130, branches=210, fp=2, vec=10),
    dict(ipc=0.7, l1i=1.5, l1d=60.0, l2=30.0, l3=15.0, itlb=40.0, dtlb=4000.0, stlb=900.0, br=2.0,
         fe=0.05, be=0.70, loads=330, stores=110, branches=170, fp=1, vec=5),
    dict(ipc=4.5, l1i=0.2, l1d=3.0, l2=0.5, l3=0.05, itlb=5.0, dtlb=10.0, stlb=1.0, br=0.3,
         fe=0.02, be=0.08, loads=120, stores=45, branches=20, fp=300, vec=500),
]


def counters_for(rng, centre, instr, machine, spread=0.02):
    freq, mult = MACHINES[machine]

    def jitter(v):
        return v * (1.0 + rng.uniform(-spread, spread))

    ipc = jitter(centre["ipc"])
    cycles = instr / ipc
    per_k = lambda v: jitter(v) * instr / 1e3
    per_m = lambda v: jitter(v) * instr / 1e6
    c = {
        "instructions": instr,
        "cycles": cycles,
        "loads": per_k(centre["loads"]),
        "stores": per_k(centre["stores"]),
        "branches": per_k(centre["branches"]),
        "branch_misses": per_k(centre["br"]),
        "l1i_misses": per_k(centre["l1i"]),
        "l1d_misses": per_k(centre["l1d"]),
        "l2_misses": per_k(centre["l2"]),
        "l3_misses": per_k(centre["l3"]),
        "l1_itlb_misses": per_m(centre["itlb"]),
        "l1_dtlb_misses": per_m(centre["dtlb"]),
        "l2_tlb_misses": per_m(centre["stlb"]),
        "frontend_stall_cycles": jitter(centre["fe"]) * cycles,
        "backend_stall_cycles": jitter(centre["be"]) * cycles,
        "fp_instructions": per_k(centre["fp"]),
        "vector_instructions": per_k(centre["vec"]),
        "kernel_instructions": instr * 0.01,
        "user_instructions": instr * 0.99,
    }
    for e, m in mult.items():
        c[e] *= m
    c["frontend_stall_cycles"] = min(c["frontend_stall_cycles"], 0.95 * cycles)
    c["backend_stall_cycles"] = min(c["backend_stall_cycles"], 0.95 * cycles)
    c["dram_bytes"] = c["l3_misses"] * 64 * 1.5
    wall = cycles / freq
    return {k: round(v) for k, v in c.items()}, wall


def demo():
    rng = random.Random(20261019)
    store, scores = [], []

    def emit(suite, name, counts, machine, wall, score):
        for event, value in sorted(counts.items()):
            store.append([suite, name, machine, event, value, "true"])
        scores.append([suite, name, machine, f"{score:.4f}", f"{wall:.4f}"])

    # 14 workloads in 4 planted groups (4, 4, 3, 3)
    planted = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 3, 3, 3]
    for i, c in enumerate(planted):
        name = f"7{i:02d}.g{c}w{i}_r"
        instr = rng.randint(1000, 3000) * 10**9
        for machine in MACHINES:
            counts, wall = counters_for(rng, CENTRES[c], instr, machine)
            emit("int_rate", name, counts, machine, wall, 1000.0 / wall * rng.uniform(0.9, 1.1))

    # older suite for comparison, drawn around the first two centres with more spread
    for i in range(10):
        c = i % 2
        name = f"5{i:02d}.old{i}_r"
        instr = rng.randint(800, 2500) * 10**9
        for machine in MACHINES:
            counts, wall = counters_for(rng, CENTRES[c], instr, machine, spread=0.25)
            emit("int_rate_old", name, counts, machine, wall, 1000.0 / wall)

    # proxy constituents and a target; equal cycle rate so rates blend simply
    def profile(ipc, l1i_mpki, wall, machine, extra):
        freq = MACHINES[machine][0]
        cycles = round(freq * wall)
        instr = round(ipc * cycles)
        counts = {
            "instructions": instr,
            "cycles": cycles,
            "l1i_misses": round(l1i_mpki * instr / 1e3),
            "loads": round(instr * extra[0]),
            "stores": round(instr * extra[1]),
            "branches": round(instr * extra[2]),
        }
        return counts

    pool = [
        ("709.cactus_r", 1.696, 82.3, 375.0, (0.519, 0.079, 0.011)),
        ("749.fotonik3d_r", 0.785, 0.24, 536.0, (0.368, 0.137, 0.018)),
        ("731.astcenc_r", 2.718, 1.1, 300.0, (0.283, 0.065, 0.087)),
        ("782.lbm_r", 1.241, 0.05, 420.0, (0.212, 0.109, 0.007)),
    ]
    for name, ipc, mpki, wall, extra in pool:
        for machine in MACHINES:
            emit("fp_rate", name, profile(ipc, mpki, wall, machine, extra), machine, wall, 1000.0 / wall)
    for machine in MACHINES:
        emit("dcperf", "django", profile(1.16 / (1 - 0.137), 60.0, 100.0, machine, (0.3, 0.12, 0.2)),
             machine, 100.0, 10.0)

    store.sort()
    scores.sort()
    write_csv(os.path.join(HERE, "demo", "store.csv"), STORE_HEADER, store)
    write_csv(os.path.join(HERE, "demo", "scores.csv"), SCORES_HEADER, scores)


def raw_dumps():
    """Small perf-style dumps for the ingest path."""
    rng = random.Random(7)
    base = os.path.join(HERE, "raw")
    raw_names = {
        "instructions": "inst_retired.any",
        "cycles": "cpu_clk_unhalted.thread",
        "loads": "mem_inst_retired.all_loads",
        "stores": "mem_inst_retired.all_stores",
        "branches": "br_inst_retired.all_branches",
        "l1i_misses": "icache_64b.iftag_miss",
        "dram_bytes": "uncore_imc/cas_count_read/",
    }
    for w, c in [("700.alpha_r", 0), ("701.beta_r", 1), ("702.gamma_r", 2)]:
        counts, _ = counters_for(rng, CENTRES[c], 10**12, "CPU-A")
        path = os.path.join(base, "CPU-A", "int_rate", f"{w}.csv")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w") as f:
            f.write("# started on Mon Oct 19 2026\n\n")
            for event, raw in raw_names.items():
                value = counts[event] if event != "dram_bytes" else counts[event] // 64
                f.write(f"{value},,{raw},1000000,100.00,,\n")
            f.write("<not supported>,,fp_arith_inst_retired.scalar,0,100.00,,\n")
    with open(os.path.join(HERE, "raw", "counter_maps.toml"), "w") as f:
        f.write("[CPU-A]\ncacheline_bytes = 64\n\n[CPU-A.events]\n")
        for event, raw in raw_names.items():
            if event == "dram_bytes":
                f.write(f'{event} = {{ event = "{raw}", unit = "lines" }}\n')
            else:
                f.write(f'{event} = "{raw}"\n')
        f.write('fp_instructions = "fp_arith_inst_retired.scalar"\n')


if __name__ == "__main__":
    table1()
    demo()
    raw_dumps()
