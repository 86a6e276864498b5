import type { ApiClient, CircleRegion, Task } from "./api.js";

export const HOVER_DEBOUNCE_MS = 150;
export const REVEAL_RADIUS = 40;

// Nearest configured level; a tie goes to the lower sigma so the logged
// exposure never understates what was shown (same rule as the server).
export function snapToLevel(value: number, levels: number[]): number {
  let best = levels[0];
  for (const level of levels) {
    const d = Math.abs(value - level);
    const bestD = Math.abs(value - best);
    if (d < bestD || (d === bestD && level < best)) best = level;
  }
  return best;
}

export class UrlPool {
  private urls: string[] = [];

  adopt(blob: Blob): string {
    const url = URL.createObjectURL(blob);
    this.urls.push(url);
    return url;
  }

  release(url: string): void {
    const at = this.urls.indexOf(url);
    if (at === -1) return;
    this.urls.splice(at, 1);
    URL.revokeObjectURL(url);
  }

  releaseAll(): void {
    for (const url of this.urls) URL.revokeObjectURL(url);
    this.urls = [];
  }
}

function placeOverlay(layer: HTMLElement, url: string, region: CircleRegion): HTMLImageElement {
  const img = document.createElement("img");
  img.className = "reveal-overlay";
  img.src = url;
  img.style.left = `${Math.max(0, region.cx - region.r)}px`;
  img.style.top = `${Math.max(0, region.cy - region.r)}px`;
  layer.appendChild(img);
  return img;
}

/** Stage 4: each click buys a permanent unblurred patch. */
export class ClickReveal {
  private inflight = false;

  constructor(
    private api: ApiClient,
    private task: Task,
    private layer: HTMLElement,
    private pool: UrlPool,
    private radius = REVEAL_RADIUS,
  ) {}

  attach(): void {
    this.layer.addEventListener("click", this.onClick);
  }

  private onClick = (e: MouseEvent) => {
    if (this.inflight) return; // one tile request per interaction
    void this.reveal({
      cx: Math.max(0, Math.round(e.offsetX || 0)),
      cy: Math.max(0, Math.round(e.offsetY || 0)),
      r: this.radius,
    });
  };

  private async reveal(region: CircleRegion): Promise<void> {
    this.inflight = true;
    try {
      const blob = await this.api.fetchTile(this.task.image_id, region);
      placeOverlay(this.layer, this.pool.adopt(blob), region);
    } catch {
      this.offerRetry(region);
    } finally {
      this.inflight = false;
    }
  }

  private offerRetry(region: CircleRegion): void {
    const button = document.createElement("button");
    button.type = "button";
    button.className = "tile-retry";
    button.textContent = "Reveal failed. Retry";
    button.style.left = `${Math.max(0, region.cx - region.r)}px`;
    button.style.top = `${Math.max(0, region.cy - region.r)}px`;
    button.addEventListener("click", (e) => {
      e.stopPropagation();
      button.remove();
      void this.reveal(region);
    });
    this.layer.appendChild(button);
  }
}

/** Stage 5: a patch stays clear only while the pointer rests on the image. */
export class HoverReveal {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private overlay: HTMLImageElement | null = null;
  private overlayUrl: string | null = null;
  private inflight = false;
  private pointerInside = false;

  constructor(
    private api: ApiClient,
    private task: Task,
    private layer: HTMLElement,
    private pool: UrlPool,
    private radius = REVEAL_RADIUS,
  ) {}

  attach(): void {
    this.layer.addEventListener("pointerenter", this.onEnter);
    this.layer.addEventListener("pointerleave", this.onLeave);
  }

  private onEnter = (e: MouseEvent) => {
    this.pointerInside = true;
    const region = {
      cx: Math.max(0, Math.round(e.offsetX || 0)),
      cy: Math.max(0, Math.round(e.offsetY || 0)),
      r: this.radius,
    };
    // Debounce so a pointer merely passing through logs no exposure.
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.open(region);
    }, HOVER_DEBOUNCE_MS);
  };

  private async open(region: CircleRegion): Promise<void> {
    if (this.inflight || this.overlay) return;
    this.inflight = true;
    try {
      const blob = await this.api.fetchTile(this.task.image_id, region);
      // The server logged the reveal the moment the tile was produced, so a
      // pointer that left mid-flight must still close the exposure window.
      if (!this.pointerInside) {
        void this.api.postReveal({ image_id: this.task.image_id, kind: "hover_end" });
        return;
      }
      this.overlayUrl = this.pool.adopt(blob);
      this.overlay = placeOverlay(this.layer, this.overlayUrl, region);
    } catch {
      // no overlay, no hover_end: nothing was revealed
    } finally {
      this.inflight = false;
    }
  }

  private onLeave = () => {
    this.pointerInside = false;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
      return; // never fetched, nothing to report
    }
    if (!this.overlay || !this.overlayUrl) return;
    this.overlay.remove();
    this.pool.release(this.overlayUrl); // clear pixels are not retained
    this.overlay = null;
    this.overlayUrl = null;
    void this.api.postReveal({ image_id: this.task.image_id, kind: "hover_end" });
  };
}

/** Stage 6: one slider trades blur strength for exposure, whole image. */
export class SliderControl {
  current: number;

  private inflight = false;
  private shownUrl: string | null = null;

  constructor(
    private api: ApiClient,
    private task: Task,
    private img: HTMLImageElement,
    private input: HTMLInputElement,
    private pool: UrlPool,
    private levels: number[],
    private stageSigma: number,
    private baseUrl: string,
  ) {
    this.current = stageSigma;
  }

  attach(): void {
    this.input.min = String(Math.min(...this.levels));
    this.input.max = String(Math.max(...this.levels));
    this.input.step = "any";
    this.input.value = String(this.stageSigma);
    this.input.addEventListener("change", this.onChange);
  }

  private onChange = () => {
    if (this.inflight) {
      this.input.value = String(this.current);
      return;
    }
    const level = snapToLevel(Number(this.input.value), this.levels);
    this.input.value = String(level);
    if (level === this.current) return;
    void this.show(level);
  };

  private async show(level: number): Promise<void> {
    if (level >= this.stageSigma) {
      // Back to full blur: reuse the base rendition and log the retreat
      // (fetches at the stage sigma are not exposure, so the server would
      // otherwise never learn the clear view ended).
      this.current = level;
      this.swapTo(this.baseUrl);
      void this.api.postReveal({
        image_id: this.task.image_id,
        kind: "slider_set",
        sigma_value: level,
      });
      return;
    }
    // Below the stage sigma the fetch itself is the logged reveal.
    this.inflight = true;
    try {
      const blob = await this.api.fetchRendition(this.task.image_id, level);
      this.current = level;
      this.swapTo(this.pool.adopt(blob));
    } catch {
      this.input.value = String(this.current); // stay at the level still shown
    } finally {
      this.inflight = false;
    }
  }

  private swapTo(url: string): void {
    this.img.src = url;
    if (this.shownUrl) this.pool.release(this.shownUrl);
    this.shownUrl = url === this.baseUrl ? null : url;
  }
}
