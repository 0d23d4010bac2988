// @vitest-environment jsdom
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { FramePlayer } from "../src/animate.js";

describe("FramePlayer", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("starts at frame 0 and scrubbing emits the frame index", () => {
    const player = new FramePlayer(21, { label: (i) => `f${i}` });
    const seen: number[] = [];
    player.onFrame = (i) => seen.push(i);
    expect(player.index).toBe(0);
    player.index = 7;
    expect(seen).toEqual([7]);
  });

  it("play advances at the fixed interval and saturates at the last frame", () => {
    const player = new FramePlayer(21, { intervalMs: 100 });
    const seen: number[] = [];
    player.onFrame = (i) => seen.push(i);
    player.play();
    vi.advanceTimersByTime(100 * 25); // more ticks than frames
    expect(seen[seen.length - 1]).toBe(20);
    expect(player.index).toBe(20); // slider saturated at T_max
    // a further tick must not move or wrap
    vi.advanceTimersByTime(500);
    expect(player.index).toBe(20);
  });

  it("clamps out-of-range scrubs", () => {
    const player = new FramePlayer(5);
    player.index = 99;
    expect(player.index).toBe(4);
    player.index = -3;
    expect(player.index).toBe(0);
  });
});
