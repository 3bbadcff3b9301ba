"""End-to-end smoke test of the Python bindings: build, inject, render, compare."""

import llsi


def main():
    golden = llsi.FabricConfig.demo("lut-init-pair", cols=5, rows=5)
    assert golden.validate() == []
    assert llsi.FabricConfig.parse(golden.to_text()) == golden

    suspect, spec = golden.inject("init-flip:SLICE_X1Y1.D6LUT:0x00008000:0x00010000")
    assert "SLICE_X1Y1.D6LUT" in spec
    llsi.check_dormant(golden, golden.inject("trit-tc:6", seed=1)[0])

    region = (0.0, 0.0, 75.0, 75.0)
    g, refl = llsi.render(golden, seed=1, region=region)
    g2, _ = llsi.render(golden, seed=2, region=region)
    s, _ = llsi.render(suspect, seed=3, region=region)
    assert (g.width, g.height) == (300, 300)
    assert g.dwell_ms == 3.3 and g.bandpass_hz == 100.0
    assert refl.kind == "reflectance"
    assert llsi.Image.from_pgm(g.to_pgm()).codes() == g.codes()

    clean = llsi.compare(g, g2, golden)
    assert clean.verdict == "CLEAN", clean.to_text()

    report = llsi.compare(g, s, golden)
    assert report.tampered, report.to_text()
    cells = {c for comp in report.components() for c in comp[4]}
    assert "SLICE_X1Y1.D6LUT" in cells, cells
    assert report.overlay_ppm().startswith(b"P6")

    assert llsi.lut_eval([False, True, True, False], [True, False])
    assert len(llsi.lut_mux_states([False] * 64, [True] * 6)) == 63

    try:
        golden.inject("no-such-trojan")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown builtin accepted")

    print(report.to_text().splitlines()[0])
    print("smoke test ok")


if __name__ == "__main__":
    main()
