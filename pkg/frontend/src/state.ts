/** View state: the grid mirrors the service's last response verbatim. */

import type { PinEntry, ResultEntry, SeedRef } from "./api.js";

export interface ViewState {
  seed: SeedRef | null;
  results: ResultEntry[];
  historyDepth: number;
  busy: boolean;
  notice: string | null;
  pinCount: number;
  boardPins: PinEntry[];
  reviewOpen: boolean;
}

export function initialState(): ViewState {
  return {
    seed: null,
    results: [],
    historyDepth: 0,
    busy: false,
    notice: null,
    pinCount: 0,
    boardPins: [],
    reviewOpen: false,
  };
}

export class Store {
  private state: ViewState = initialState();
  private listeners: Array<(s: ViewState) => void> = [];

  get(): ViewState {
    return this.state;
  }

  update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  subscribe(listener: (s: ViewState) => void): void {
    this.listeners.push(listener);
    listener(this.state);
  }
}
