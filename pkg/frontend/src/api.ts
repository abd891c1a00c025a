/** Typed client for the retrieval service JSON API. */

export interface SeedRef {
  ref: string;
  kind: "image" | "upload";
  url: string;
}

export interface ResultEntry {
  id: string;
  dataset: string;
  distance: number;
  url: string;
}

export interface RetrievalSet {
  seed: SeedRef;
  results: ResultEntry[];
  timestamp: number;
  history_depth: number;
}

export interface PinEntry {
  ref: string;
  timestamp: number;
  session: string;
}

export interface BoardView {
  board: string;
  pins: PinEntry[];
}

export interface DatasetInfo {
  tag: string;
  count: number;
}

export interface Api {
  searchByUpload(image: Blob, session: string): Promise<RetrievalSet>;
  searchById(imageId: string, session: string): Promise<RetrievalSet>;
  undo(session: string): Promise<RetrievalSet>;
  pin(board: string, ref: string, session: string): Promise<BoardView>;
  board(board: string): Promise<BoardView>;
  datasets(): Promise<DatasetInfo[]>;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class HttpApi implements Api {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      let message = `${response.status}`;
      try {
        const body = await response.json();
        message = body.error ?? body.detail ?? message;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(String(message), response.status);
    }
    return (await response.json()) as T;
  }

  searchByUpload(image: Blob, session: string): Promise<RetrievalSet> {
    const form = new FormData();
    form.append("image", image, "seed.png");
    form.append("session", session);
    return this.request("/api/search", { method: "POST", body: form });
  }

  searchById(imageId: string, session: string): Promise<RetrievalSet> {
    return this.request("/api/search", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ image_id: imageId, session }),
    });
  }

  undo(session: string): Promise<RetrievalSet> {
    return this.request(`/api/session/${encodeURIComponent(session)}/undo`, {
      method: "POST",
    });
  }

  pin(board: string, ref: string, session: string): Promise<BoardView> {
    return this.request(`/api/boards/${encodeURIComponent(board)}/pins`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ref, session }),
    });
  }

  board(board: string): Promise<BoardView> {
    return this.request(`/api/boards/${encodeURIComponent(board)}`);
  }

  datasets(): Promise<DatasetInfo[]> {
    return this.request("/api/datasets");
  }
}
