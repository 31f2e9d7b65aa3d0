// Minimal 2D-context stub that records every drawing operation, so tests
// can assert on frames without a real canvas.

import type { Canvas2D } from "../src/render.js";

export interface StubCanvas extends Canvas2D {
  ops: string[];
}

export function makeStubCanvas(): StubCanvas {
  const ops: string[] = [];
  const record =
    (name: string) =>
    (...args: unknown[]) =>
      void ops.push(`${name}(${args.map((a) => JSON.stringify(a)).join(",")})`);
  const stub = {
    ops,
    fillStyle: "" as string,
    strokeStyle: "" as string,
    lineWidth: 1,
    font: "",
    textAlign: "left" as CanvasTextAlign,
    save: record("save"),
    restore: record("restore"),
    clearRect: record("clearRect"),
    fillRect: record("fillRect"),
    strokeRect: record("strokeRect"),
    beginPath: record("beginPath"),
    moveTo: record("moveTo"),
    lineTo: record("lineTo"),
    arc: record("arc"),
    stroke: record("stroke"),
    fill: record("fill"),
    fillText: record("fillText"),
    translate: record("translate"),
    rotate: record("rotate"),
  };
  return stub;
}
