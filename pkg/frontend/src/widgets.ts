/** Small DOM helpers shared by the views. */

export function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function select(
  labelText: string,
  options: { value: string; label: string }[],
  onChange: (value: string) => void,
): HTMLElement {
  const wrap = h("label", "control");
  wrap.append(labelText + " ");
  const sel = h("select");
  for (const opt of options) {
    const o = h("option");
    o.value = opt.value;
    o.textContent = opt.label;
    sel.appendChild(o);
  }
  sel.addEventListener("change", () => onChange(sel.value));
  wrap.appendChild(sel);
  return wrap;
}

export function checkbox(labelText: string, onChange: (checked: boolean) => void): HTMLElement {
  const wrap = h("label", "control");
  const box = h("input");
  box.type = "checkbox";
  box.addEventListener("change", () => onChange(box.checked));
  wrap.append(box, " " + labelText);
  return wrap;
}

export interface SliderRow {
  root: HTMLElement;
  value: () => number;
}

export function sliderRow(
  labelText: string,
  min: number,
  max: number,
  step: number,
  initial: number,
  onRelease: () => void,
): SliderRow {
  const root = h("div", "slider-row");
  const label = h("span", "slider-label", labelText);
  const input = h("input");
  input.type = "range";
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  input.value = String(initial);
  const readout = h("span", "slider-value", input.value);
  input.addEventListener("input", () => {
    readout.textContent = Number(input.value).toFixed(3);
  });
  input.addEventListener("change", onRelease);  // fires on release, not drag
  root.append(label, input, readout);
  return { root, value: () => Number(input.value) };
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function errorPanel(message: string): HTMLElement {
  return h("div", "error-panel", message);
}
