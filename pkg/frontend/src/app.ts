/** Wires the capture / grid / pin / undo / review surface to the API.
 *
 * Interaction model: choose (or photograph) a seed image, get a 10-box
 * grid of retrieved images back. Click a box to re-seed the search with
 * it, double-click a box (or the seed preview) to pin it to the board,
 * undo to restore the previous grid. The review panel lists everything
 * pinned so far. The grid renders the service's result list in order;
 * no client-side re-ranking.
 */

import { Api, ApiError, RetrievalSet } from "./api.js";
import { Store } from "./state.js";

export interface AppOptions {
  session?: string;
  board?: string;
  /** ms to wait before treating a click as a re-seed (a double-click
   * within the window cancels it); tests shrink this. */
  clickDelayMs?: number;
}

export class App {
  readonly store = new Store();
  private readonly session: string;
  private readonly board: string;
  private readonly clickDelay: number;
  private pendingClick: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: Api,
    options: AppOptions = {},
  ) {
    this.session = options.session ?? "browser";
    this.board = options.board ?? "default";
    this.clickDelay = options.clickDelayMs ?? 250;
    this.root.innerHTML = TEMPLATE;
    this.bind();
    this.store.subscribe(() => this.render());
  }

  // -- actions ----------------------------------------------------------

  async captureSeed(image: Blob): Promise<void> {
    if (this.store.get().busy) {
      return; // single in-flight search
    }
    this.store.update({ busy: true, notice: null });
    try {
      this.applySet(await this.api.searchByUpload(image, this.session));
    } catch (err) {
      this.fail(err);
    } finally {
      this.store.update({ busy: false });
    }
  }

  async reseed(imageId: string): Promise<void> {
    if (this.store.get().busy) {
      return;
    }
    this.store.update({ busy: true, notice: null });
    try {
      this.applySet(await this.api.searchById(imageId, this.session));
    } catch (err) {
      this.fail(err);
    } finally {
      this.store.update({ busy: false });
    }
  }

  async pinRef(ref: string): Promise<void> {
    try {
      const board = await this.api.pin(this.board, ref, this.session);
      this.store.update({ pinCount: board.pins.length, boardPins: board.pins });
      this.flashPinConfirmation(ref);
    } catch (err) {
      this.fail(err);
    }
  }

  async undoGesture(): Promise<void> {
    if (this.store.get().historyDepth < 1) {
      return;
    }
    try {
      this.applySet(await this.api.undo(this.session));
    } catch (err) {
      this.fail(err);
    }
  }

  async toggleReview(): Promise<void> {
    const open = !this.store.get().reviewOpen;
    if (open) {
      try {
        const board = await this.api.board(this.board);
        this.store.update({ reviewOpen: true, pinCount: board.pins.length, boardPins: board.pins });
        return;
      } catch (err) {
        if (err instanceof ApiError && err.status === 404) {
          this.store.update({ reviewOpen: true, pinCount: 0, boardPins: [] });
          return;
        }
        this.fail(err);
        return;
      }
    }
    this.store.update({ reviewOpen: false });
  }

  private applySet(set: RetrievalSet): void {
    this.store.update({
      seed: set.seed,
      results: set.results,
      historyDepth: set.history_depth,
      notice: null,
    });
  }

  private fail(err: unknown): void {
    const message = err instanceof Error ? err.message : String(err);
    this.store.update({ notice: message });
  }

  // -- DOM ---------------------------------------------------------------

  private el<T extends HTMLElement>(selector: string): T {
    return this.root.querySelector(selector) as T;
  }

  private bind(): void {
    const fileInput = this.el<HTMLInputElement>("#file-input");
    fileInput.addEventListener("change", () => {
      const file = fileInput.files?.[0];
      if (file) {
        void this.captureSeed(file);
        fileInput.value = "";
      }
    });
    this.el("#undo-btn").addEventListener("click", () => void this.undoGesture());
    this.el("#review-btn").addEventListener("click", () => void this.toggleReview());
    this.el("#seed-box").addEventListener("dblclick", () => {
      const seed = this.store.get().seed;
      if (seed) {
        void this.pinRef(seed.ref);
      }
    });
    const grid = this.el("#grid");
    grid.addEventListener("click", (event) => {
      const id = this.boxId(event);
      if (id === null) {
        return; // empty grid or non-box click: no-op
      }
      if (this.pendingClick !== null) {
        clearTimeout(this.pendingClick);
      }
      this.pendingClick = setTimeout(() => {
        this.pendingClick = null;
        void this.reseed(id);
      }, this.clickDelay);
    });
    grid.addEventListener("dblclick", (event) => {
      const id = this.boxId(event);
      if (id === null) {
        return;
      }
      if (this.pendingClick !== null) {
        clearTimeout(this.pendingClick); // a double-click is a pin, not a re-seed
        this.pendingClick = null;
      }
      void this.pinRef(id);
    });
    this.bindCamera();
  }

  private boxId(event: Event): string | null {
    const box = (event.target as HTMLElement).closest("[data-id]");
    return box ? (box as HTMLElement).dataset.id ?? null : null;
  }

  private bindCamera(): void {
    const cameraBtn = this.el<HTMLButtonElement>("#camera-btn");
    const captureBtn = this.el<HTMLButtonElement>("#capture-btn");
    const video = this.el<HTMLVideoElement>("#camera");
    if (typeof navigator === "undefined" || !navigator.mediaDevices?.getUserMedia) {
      cameraBtn.disabled = true;
      cameraBtn.title = "camera unavailable";
      return;
    }
    cameraBtn.addEventListener("click", async () => {
      try {
        const stream = await navigator.mediaDevices.getUserMedia({ video: true });
        video.srcObject = stream;
        video.hidden = false;
        captureBtn.disabled = false;
      } catch (err) {
        this.fail(err);
      }
    });
    captureBtn.addEventListener("click", () => {
      const canvas = document.createElement("canvas");
      canvas.width = video.videoWidth || 640;
      canvas.height = video.videoHeight || 480;
      canvas.getContext("2d")?.drawImage(video, 0, 0);
      canvas.toBlob((blob) => {
        if (blob) {
          void this.captureSeed(blob);
        }
      }, "image/png");
    });
  }

  private flashPinConfirmation(ref: string): void {
    const box = this.root.querySelector(`[data-id="${CSS.escape(ref)}"]`) ??
      this.el("#seed-box");
    box.classList.add("pinned-flash");
    setTimeout(() => box.classList.remove("pinned-flash"), 600);
  }

  private render(): void {
    const state = this.store.get();

    const notice = this.el("#notice");
    notice.hidden = state.notice === null;
    notice.textContent = state.notice ?? "";

    const seedBox = this.el("#seed-box");
    const seedImg = this.el<HTMLImageElement>("#seed-img");
    if (state.seed) {
      seedBox.classList.remove("empty");
      seedImg.src = state.seed.url;
      seedImg.alt = `seed ${state.seed.ref}`;
    } else {
      seedBox.classList.add("empty");
    }

    this.el<HTMLButtonElement>("#undo-btn").disabled = state.historyDepth < 1;
    this.el("#history-depth").textContent = String(state.historyDepth);
    this.el("#pin-count").textContent = String(state.pinCount);
    this.root.classList.toggle("busy", state.busy);

    const grid = this.el("#grid");
    grid.replaceChildren(
      ...state.results.map((entry, index) => {
        const box = document.createElement("figure");
        box.className = "box";
        box.dataset.id = entry.id;
        box.dataset.index = String(index);
        const img = document.createElement("img");
        img.src = entry.url;
        img.alt = entry.id;
        const caption = document.createElement("figcaption");
        caption.textContent = `${entry.dataset} · ${entry.distance.toFixed(3)}`;
        box.append(img, caption);
        return box;
      }),
    );

    const review = this.el("#review");
    review.hidden = !state.reviewOpen;
    this.el("#pin-list").replaceChildren(
      ...state.boardPins.map((pin) => {
        const item = document.createElement("li");
        const img = document.createElement("img");
        img.src = `/api/image/${pin.ref}`;
        img.alt = pin.ref;
        const label = document.createElement("span");
        label.textContent = pin.ref;
        item.append(img, label);
        return item;
      }),
    );
  }
}

const TEMPLATE = `
  <header class="toolbar">
    <label class="file-btn">Seed image
      <input id="file-input" type="file" accept="image/*">
    </label>
    <button id="camera-btn" type="button">Camera</button>
    <button id="capture-btn" type="button" disabled>Capture</button>
    <button id="undo-btn" type="button" disabled>Undo (<span id="history-depth">0</span>)</button>
    <button id="review-btn" type="button">Pins (<span id="pin-count">0</span>)</button>
  </header>
  <p id="notice" class="notice" hidden></p>
  <section class="seed-area">
    <video id="camera" autoplay playsinline hidden></video>
    <figure id="seed-box" class="seed-box empty">
      <img id="seed-img" alt="seed">
      <figcaption>seed (double-click to pin)</figcaption>
    </figure>
  </section>
  <section id="grid" class="grid" aria-label="retrieved images"></section>
  <section id="review" class="review" hidden>
    <h2>Pinned images</h2>
    <ul id="pin-list"></ul>
  </section>
`;

export function createApp(root: HTMLElement, api: Api, options?: AppOptions): App {
  return new App(root, api, options);
}
