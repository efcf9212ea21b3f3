import { describe, expect, it } from "vitest";
import { decodeHash, emptySelection, encodeView, Selection } from "../src/selection.js";

function roundTrip(view: Parameters<typeof encodeView>[0], sel: Selection) {
  return decodeHash(encodeView(view, sel));
}

describe("deep links", () => {
  it("euler selection round-trips", () => {
    const sel = { ...emptySelection(), stores: ["alpha", "beta", "gamma"] };
    const hash = encodeView("euler", sel);
    expect(hash).toBe("#/euler?stores=alpha%2Cbeta%2Cgamma");
    const back = roundTrip("euler", sel);
    expect(back.view).toBe("euler");
    expect(back.selection).toEqual(sel);
  });

  it("a region link carries both the mask and its set expression", () => {
    const sel = { ...emptySelection(), stores: ["alpha", "beta", "gamma"], region: 3 };
    const hash = encodeView("listing", sel);
    expect(hash).toContain("region=110");
    const back = decodeHash(hash);
    expect(back.view).toBe("listing");
    expect(back.selection.region).toBe(3);
    expect(back.selection.expr).toBe("(alpha & beta) - (gamma)");
  });

  it("the region mask is authoritative over a tampered expr parameter", () => {
    const sel = { ...emptySelection(), stores: ["a", "b"], region: 1, expr: "" };
    const hash = encodeView("listing", sel).replace(/expr=[^&]*/, "expr=b");
    expect(decodeHash(hash).selection.expr).toBe("a - (b)");
  });

  it("listing filters round-trip, including awkward characters", () => {
    const sel: Selection = {
      ...emptySelection(),
      expr: 'alpha & "two words"',
      subject: "O=Ex&mple, C=SE",
      expiredOnly: true,
      includedIn: 3,
    };
    const back = roundTrip("listing", sel);
    expect(back.view).toBe("listing");
    expect(back.selection).toEqual(sel);
  });

  it("frequency and timeline parameters round-trip", () => {
    const freq = { ...emptySelection(), program: "google", states: "usable,qualified" };
    expect(roundTrip("frequency", freq).selection).toEqual(freq);
    const tl = { ...emptySelection(), log: "alpha" };
    const back = roundTrip("timeline", tl);
    expect(back.view).toBe("timeline");
    expect(back.selection).toEqual(tl);
  });

  it("re-encoding a decoded link is stable", () => {
    const hash = "#/listing?stores=a%2Cb&region=01&subject=x";
    const once = decodeHash(hash);
    const twice = decodeHash(encodeView(once.view, once.selection));
    expect(twice).toEqual(once);
  });

  it("unknown views and empty hashes fall back to euler", () => {
    expect(decodeHash("").view).toBe("euler");
    expect(decodeHash("#/nonsense?x=1").view).toBe("euler");
    expect(decodeHash("#/euler").selection).toEqual(emptySelection());
  });

  it("a region of all zeros or the wrong width is dropped", () => {
    expect(decodeHash("#/listing?stores=a%2Cb&region=00").selection.region).toBeNull();
    expect(decodeHash("#/listing?stores=a%2Cb&region=101").selection.region).toBeNull();
  });
});
