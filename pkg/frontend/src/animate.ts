/** Frame player: a slider scrubs frames, play advances at a fixed interval. */

export interface PlayerOptions {
  intervalMs?: number;
  label?: (index: number) => string;
}

export class FramePlayer {
  readonly root: HTMLElement;
  onFrame: (index: number) => void = () => {};
  private slider: HTMLInputElement;
  private button: HTMLButtonElement;
  private readout: HTMLSpanElement;
  private timer: ReturnType<typeof setInterval> | undefined;
  private readonly interval: number;
  private readonly label: (index: number) => string;

  constructor(private frameCount: number, options: PlayerOptions = {}) {
    this.interval = options.intervalMs ?? 200;
    this.label = options.label ?? ((i) => String(i + 1));
    this.root = document.createElement("div");
    this.root.className = "player";
    this.button = document.createElement("button");
    this.button.textContent = "▶";
    this.slider = document.createElement("input");
    this.slider.type = "range";
    this.slider.min = "0";
    this.slider.max = String(frameCount - 1);
    this.slider.step = "1";
    this.slider.value = "0";
    this.readout = document.createElement("span");
    this.readout.className = "player-readout";
    this.root.append(this.button, this.slider, this.readout);

    this.slider.addEventListener("input", () => {
      this.stop();
      this.emit();
    });
    this.button.addEventListener("click", () => {
      if (this.timer) {
        this.stop();
      } else {
        this.play();
      }
    });
    this.updateReadout();
  }

  get index(): number {
    return Number(this.slider.value);
  }

  set index(i: number) {
    this.slider.value = String(Math.max(0, Math.min(this.frameCount - 1, i)));
    this.emit();
  }

  private emit(): void {
    this.updateReadout();
    this.onFrame(this.index);
  }

  private updateReadout(): void {
    this.readout.textContent = this.label(this.index);
  }

  play(): void {
    this.stop();
    this.button.textContent = "❚❚";
    this.timer = setInterval(() => {
      if (this.index >= this.frameCount - 1) {
        this.stop();  // saturate at the last frame
        return;
      }
      this.index = this.index + 1;
    }, this.interval);
  }

  stop(): void {
    if (this.timer) {
      clearInterval(this.timer);
      this.timer = undefined;
    }
    this.button.textContent = "▶";
  }
}
